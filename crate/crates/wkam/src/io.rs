//! Persistence: binary grid files with text sidecars, the on-disk kernel
//! cache, and CSV exports. All writes are atomic (write-temp-then-rename).
//!
//! Grid file layout, little-endian throughout:
//!   magic "WKAM" | version u16 | dim u16 | per-axis sizes u32 | values f64
//! The `<path>.meta` sidecar records spacing, model label, alpha, anchor and
//! a SHA-256 of the binary payload; a hash mismatch on read is reported as a
//! warning, not an error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::kernel::{ActionKernel, Direction};
use crate::regularize::SmoothnessProfile;
use crate::structures::{AlphaTable, BarrierMatrix};
use crate::transform::LagrangianTable;
use crate::weakkam::WeakKamResult;

pub const GRID_MAGIC: &[u8; 4] = b"WKAM";
pub const GRID_VERSION: u16 = 1;
pub const KERNEL_MAGIC: &[u8; 4] = b"WKKC";
pub const KERNEL_VERSION: u16 = 1;

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct GridMeta {
    pub label: String,
    pub alpha: Option<f64>,
    pub anchor: Option<usize>,
}

fn encode_grid(u: &GridFunction) -> Vec<u8> {
    let grid = u.grid();
    let mut bytes = Vec::with_capacity(12 + 8 * u.len());
    bytes.extend_from_slice(GRID_MAGIC);
    bytes.extend_from_slice(&GRID_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(grid.dim() as u16).to_le_bytes());
    for &n in grid.dims() {
        bytes.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for v in u.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Write the grid function and its `.meta` sidecar.
pub fn write_grid(u: &GridFunction, path: &Path, meta: &GridMeta) -> Result<()> {
    let bytes = encode_grid(u);
    let hash = sha256_hex(&bytes);
    write_atomic(path, &bytes)?;
    let mut side = String::new();
    side.push_str(&format!("format_version={GRID_VERSION}\n"));
    for (a, &n) in u.grid().dims().iter().enumerate() {
        side.push_str(&format!("spacing.{a}={}\n", 1.0 / n as f64));
    }
    side.push_str(&format!("model_label={}\n", meta.label));
    if let Some(alpha) = meta.alpha {
        side.push_str(&format!("alpha={alpha:.17e}\n"));
    }
    if let Some(anchor) = meta.anchor {
        side.push_str(&format!("anchor={anchor}\n"));
    }
    side.push_str(&format!("sha256={hash}\n"));
    write_atomic(&sidecar_path(path), side.as_bytes())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

#[derive(Debug)]
pub struct GridReadOutcome {
    pub u: GridFunction,
    pub meta: Option<GridMeta>,
    /// None: no sidecar; Some(false): sidecar hash does not match (warning).
    pub hash_ok: Option<bool>,
}

pub fn read_grid(path: &Path) -> Result<GridReadOutcome> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 || &bytes[0..4] != GRID_MAGIC {
        return Err(Error::Format("bad magic: not a grid file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported grid format version {version}")));
    }
    let dim = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if dim == 0 || dim > 2 {
        return Err(Error::Format(format!("bad dimension {dim}")));
    }
    let mut off = 8usize;
    let mut dims = Vec::with_capacity(dim);
    for _ in 0..dim {
        if off + 4 > bytes.len() {
            return Err(Error::Format("truncated header".into()));
        }
        dims.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
        off += 4;
    }
    let grid = TorusGrid::new(&dims).map_err(|e| Error::Format(e.to_string()))?;
    let count = grid.node_count();
    if bytes.len() != off + 8 * count {
        return Err(Error::Format(format!(
            "payload size {} does not match {count} nodes",
            bytes.len() - off
        )));
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let s = off + 8 * i;
        values.push(f64::from_le_bytes(bytes[s..s + 8].try_into().unwrap()));
    }
    let u = GridFunction::new(grid, values).map_err(|e| Error::Format(e.to_string()))?;

    let mut meta = None;
    let mut hash_ok = None;
    if let Ok(side) = fs::read_to_string(sidecar_path(path)) {
        let mut m = GridMeta::default();
        for line in side.lines() {
            if let Some((k, v)) = line.split_once('=') {
                match k {
                    "model_label" => m.label = v.to_string(),
                    "alpha" => m.alpha = v.parse().ok(),
                    "anchor" => m.anchor = v.parse().ok(),
                    "sha256" => hash_ok = Some(v == sha256_hex(&bytes)),
                    _ => {}
                }
            }
        }
        meta = Some(m);
    }
    Ok(GridReadOutcome { u, meta, hash_ok })
}

/// On-disk cache of built one-step kernels, keyed by a content hash of the
/// inputs that determine the costs.
pub struct KernelCache {
    dir: PathBuf,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(KernelCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Cache key for a one-step kernel build.
    #[allow(clippy::too_many_arguments)]
    pub fn key(
        label: &str,
        dims: &[usize],
        tau: f64,
        p_window: f64,
        v_window: f64,
        n_p: usize,
        n_v: usize,
        direction: Direction,
    ) -> String {
        let dir = match direction {
            Direction::Negative => "neg",
            Direction::Positive => "pos",
        };
        let canon = format!(
            "wkkc{KERNEL_VERSION}|{label}|{dims:?}|{tau:.17e}|{p_window:.17e}|{v_window:.17e}|{n_p}|{n_v}|{dir}"
        );
        sha256_hex(canon.as_bytes())
    }

    fn kernel_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.kern"))
    }

    pub fn store(&self, key: &str, kernel: &ActionKernel) -> Result<()> {
        let grid = kernel.grid();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(KERNEL_MAGIC);
        bytes.extend_from_slice(&KERNEL_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(grid.dim() as u16).to_le_bytes());
        for &n in grid.dims() {
            bytes.extend_from_slice(&(n as u32).to_le_bytes());
        }
        bytes.extend_from_slice(&kernel.tau().to_le_bytes());
        bytes.push(match kernel.direction() {
            Direction::Negative => 0,
            Direction::Positive => 1,
        });
        let band = kernel.band();
        for r in &band {
            bytes.extend_from_slice(&r.to_le_bytes());
        }
        for c in kernel.costs() {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        write_atomic(&self.kernel_path(key), &bytes)?;
        let mut side = String::new();
        side.push_str(&format!("format_version={KERNEL_VERSION}\n"));
        side.push_str(&format!("model_label={}\n", kernel.label()));
        side.push_str(&format!("grid={:?}\n", grid.dims()));
        side.push_str(&format!("tau={:.17e}\n", kernel.tau()));
        side.push_str(&format!("band={band:?}\n"));
        side.push_str(&format!(
            "direction={}\n",
            if kernel.direction() == Direction::Negative { "negative" } else { "positive" }
        ));
        write_atomic(&sidecar_path(&self.kernel_path(key)), side.as_bytes())
    }

    /// Load a cached kernel; Ok(None) on a cache miss.
    pub fn load(&self, key: &str, label: &str) -> Result<Option<ActionKernel>> {
        let path = self.kernel_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if bytes.len() < 8 || &bytes[0..4] != KERNEL_MAGIC {
            return Err(Error::Format("bad magic: not a kernel cache file".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != KERNEL_VERSION {
            return Err(Error::Format(format!("unsupported kernel cache version {version}")));
        }
        let dim = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let mut off = 8usize;
        let mut dims = Vec::with_capacity(dim);
        for _ in 0..dim {
            dims.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
            off += 4;
        }
        let grid = TorusGrid::new(&dims).map_err(|e| Error::Format(e.to_string()))?;
        let tau = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        off += 8;
        let direction = match bytes[off] {
            0 => Direction::Negative,
            1 => Direction::Positive,
            d => return Err(Error::Format(format!("bad direction byte {d}"))),
        };
        off += 1;
        let mut radii = Vec::with_capacity(dim);
        for _ in 0..dim {
            radii.push(i64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        let rest = &bytes[off..];
        if rest.len() % 8 != 0 {
            return Err(Error::Format("truncated cost payload".into()));
        }
        let costs: Vec<f64> = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ActionKernel::from_cache_parts(grid, tau, direction, &radii, costs, label).map(Some)
    }

    /// (key, size in bytes) of every cached kernel.
    pub fn entries(&self) -> Result<Vec<(String, u64)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(key) = name.strip_suffix(".kern") {
                out.push((key.to_string(), entry.metadata()?.len()));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Remove all cached kernels; returns how many were deleted.
    pub fn clear(&self) -> Result<usize> {
        let mut removed = 0;
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".kern") || name.ends_with(".kern.meta") {
                fs::remove_file(entry.path())?;
                if name.ends_with(".kern") {
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }
}

/// Serialize a 1D Lagrangian table in the binary grid format: the value
/// array is stored as an (n_x, n_v) grid; the window metadata travels in the
/// sidecar. Maximizer records are not persisted.
pub fn write_lagrangian(table: &LagrangianTable, path: &Path) -> Result<()> {
    if table.dim() != 1 {
        return Err(Error::InvalidInput(
            "binary table export is defined for 1D tables".into(),
        ));
    }
    let grid = TorusGrid::new(&[table.grid().dims()[0], table.n_v()])
        .map_err(|e| Error::Format(e.to_string()))?;
    let u = GridFunction::new(grid, table.values().to_vec())
        .map_err(|e| Error::Format(e.to_string()))?;
    write_grid(&u, path, &GridMeta::default())?;
    // Extend the sidecar with the conjugation windows.
    let side = sidecar_path(path);
    let mut text = fs::read_to_string(&side)?;
    text.push_str(&format!("table.label={}\n", table.label()));
    text.push_str(&format!("table.v_max={:.17e}\n", table.v_max()));
    text.push_str(&format!("table.p_max={:.17e}\n", table.p_max()));
    text.push_str(&format!("table.n_p={}\n", table.n_p()));
    write_atomic(&side, text.as_bytes())
}

/// Reload a 1D table written by [`write_lagrangian`].
pub fn read_lagrangian(path: &Path) -> Result<LagrangianTable> {
    let outcome = read_grid(path)?;
    let dims = outcome.u.grid().dims().to_vec();
    if dims.len() != 2 {
        return Err(Error::Format("not a serialized table".into()));
    }
    let side = fs::read_to_string(sidecar_path(path))?;
    let mut label = String::new();
    let mut v_max = None;
    let mut p_max = None;
    let mut n_p = None;
    for line in side.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k {
                "table.label" => label = v.to_string(),
                "table.v_max" => v_max = v.parse().ok(),
                "table.p_max" => p_max = v.parse().ok(),
                "table.n_p" => n_p = v.parse().ok(),
                _ => {}
            }
        }
    }
    let (Some(v_max), Some(p_max), Some(n_p)) = (v_max, p_max, n_p) else {
        return Err(Error::Format("table sidecar missing window metadata".into()));
    };
    let x_grid = TorusGrid::new(&[dims[0]]).map_err(|e| Error::Format(e.to_string()))?;
    LagrangianTable::from_parts(
        x_grid,
        v_max,
        dims[1],
        outcome.u.values().to_vec(),
        vec![0.0; dims[0] * dims[1]],
        p_max,
        n_p,
        label,
    )
}

/// CSV: iteration, shift, sup-defect.
pub fn write_residual_history_csv(path: &Path, result: &WeakKamResult) -> Result<()> {
    let mut out = String::from("iteration,shift,sup_defect\n");
    for (i, (s, d)) in result
        .shift_history
        .iter()
        .zip(&result.defect_history)
        .enumerate()
    {
        out.push_str(&format!("{},{:.17e},{:.17e}\n", i + 1, s, d));
    }
    write_atomic(path, out.as_bytes())
}

/// CSV: node coordinates and value.
pub fn write_function_csv(path: &Path, u: &GridFunction) -> Result<()> {
    let grid = u.grid();
    let mut out = String::new();
    match grid.dim() {
        1 => {
            out.push_str("x,u\n");
            for (i, v) in u.values().iter().enumerate() {
                out.push_str(&format!("{:.17e},{:.17e}\n", grid.coords(i)[0], v));
            }
        }
        _ => {
            out.push_str("x,y,u\n");
            for (i, v) in u.values().iter().enumerate() {
                let c = grid.coords(i);
                out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", c[0], c[1], v));
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// CSV: from-node, to-node, barrier value.
pub fn write_barrier_csv(path: &Path, b: &BarrierMatrix) -> Result<()> {
    let n = b.grid().node_count();
    let mut out = String::from("from,to,h\n");
    for x in 0..n {
        for y in 0..n {
            out.push_str(&format!("{x},{y},{:.17e}\n", b.value(x, y)));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// CSV: cohomology components, alpha, flat membership.
pub fn write_alpha_csv(path: &Path, table: &AlphaTable) -> Result<()> {
    let dim = table.c_nodes.first().map(|c| c.0.len()).unwrap_or(1);
    let mut out = String::new();
    for a in 0..dim {
        out.push_str(&format!("c{a},"));
    }
    out.push_str("alpha,flat\n");
    for (i, c) in table.c_nodes.iter().enumerate() {
        for v in &c.0 {
            out.push_str(&format!("{v:.17e},"));
        }
        let in_flat = table.flats.iter().position(|f| i >= f.first && i <= f.last);
        match table.alpha[i] {
            Some(a) => out.push_str(&format!("{a:.17e},")),
            None => out.push_str("nan,"),
        }
        match in_flat {
            Some(fi) => out.push_str(&format!("{fi}\n")),
            None => out.push_str("-1\n"),
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Node-index list, one per line.
pub fn write_mask(path: &Path, mask: &[bool]) -> Result<()> {
    let mut out = String::new();
    for (i, &m) in mask.iter().enumerate() {
        if m {
            out.push_str(&format!("{i}\n"));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// CSV of labeled smoothness profiles (before/after regularization).
pub fn write_profiles_csv(path: &Path, rows: &[(String, SmoothnessProfile)]) -> Result<()> {
    let mut out = String::from("stage,lip,semi_cc,semi_cv\n");
    for (label, p) in rows {
        out.push_str(&format!(
            "{label},{:.17e},{:.17e},{:.17e}\n",
            p.lip, p.semi_cc, p.semi_cv
        ));
    }
    write_atomic(path, out.as_bytes())
}
