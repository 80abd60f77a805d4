//! Output plumbing: provenance headers, atomic file writes, CSV/JSON/SVG
//! emitters. Every artifact records the config hash, seed, and version so a
//! run is reproducible from its outputs alone.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub command: String,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Result<Self> {
        let canonical = serde_json::to_string(config)?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        Ok(Provenance {
            config_sha256: hex,
            seed,
            version: VERSION.to_string(),
            command: command.to_string(),
        })
    }

    fn csv_header(&self, schema: &str) -> String {
        format!(
            "# schema={schema} config_sha256={} seed={} version={}\n",
            self.config_sha256, self.seed, self.version
        )
    }
}

/// Writes bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// JSON artifact: `{ "provenance": ..., "result": ... }`.
pub fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    provenance: &Provenance,
    result: &T,
) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        provenance: &'a Provenance,
        result: &'a T,
    }
    let path = dir.join(name);
    let mut body = serde_json::to_string_pretty(&Doc { provenance, result })?;
    body.push('\n');
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}

/// CSV artifact with a versioned-schema provenance line ahead of the header
/// row.
pub fn write_csv(
    dir: &Path,
    name: &str,
    schema: &str,
    provenance: &Provenance,
    header: &str,
    rows: &[String],
) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut body = provenance.csv_header(schema);
    body.push_str(header);
    body.push('\n');
    for r in rows {
        body.push_str(r);
        body.push('\n');
    }
    write_atomic(&path, body.as_bytes())?;
    Ok(path)
}

/// Minimal SVG polyline plot of a d(t) curve, t normalized by `t_scale`.
pub fn write_svg_curve(
    dir: &Path,
    name: &str,
    points: &[(f64, f64)],
    t_scale: f64,
    title: &str,
) -> Result<PathBuf> {
    let path = dir.join(name);
    let (w, h, ml, mb) = (640.0, 400.0, 60.0, 40.0);
    let xs: Vec<f64> = points.iter().map(|p| p.0 / t_scale).collect();
    let x_max = xs.iter().cloned().fold(1e-12, f64::max);
    let map_x = |x: f64| ml + (x / x_max) * (w - ml - 20.0);
    let map_y = |y: f64| (h - mb) - y * (h - mb - 20.0);
    let mut poly = String::new();
    for (i, &(_, d)) in points.iter().enumerate() {
        poly.push_str(&format!("{:.2},{:.2} ", map_x(xs[i]), map_y(d)));
    }
    let svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"16\" font-size=\"13\">{title}</text>\n",
            "<line x1=\"{ml}\" y1=\"{y0}\" x2=\"{xr}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<line x1=\"{ml}\" y1=\"20\" x2=\"{ml}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<text x=\"{ml}\" y=\"{lbl_y}\" font-size=\"11\">t / prediction (max {xmax:.2})</text>\n",
            "<text x=\"6\" y=\"24\" font-size=\"11\">d(t)</text>\n",
            "<polyline points=\"{poly}\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\"/>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        tx = ml,
        title = title,
        ml = ml,
        y0 = h - mb,
        xr = w - 20.0,
        lbl_y = h - 12.0,
        xmax = x_max,
        poly = poly.trim_end(),
    );
    write_atomic(&path, svg.as_bytes())?;
    Ok(path)
}

/// Compact float formatting for CSV cells: shortest roundtrip form.
pub fn fmt_f64(x: f64) -> String {
    let mut buf = ryu_like(x);
    if !buf.contains('.') && !buf.contains('e') && !buf.contains("inf") && !buf.contains("NaN") {
        buf.push_str(".0");
    }
    buf
}

fn ryu_like(x: f64) -> String {
    // `{}` on f64 is the shortest representation that round-trips
    format!("{x}")
}
