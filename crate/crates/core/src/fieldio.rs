//! Text file format for fields and masks.
//!
//! Header lines (`dim`, `shape`, `spacing`, `origin`, `kind`) followed by
//! row-major whitespace-separated values, one grid row per line. Masks write
//! the inside flags as a 0/1 block, then a second block with sigma. Floats are
//! printed with 17 significant digits, so write → read is the identity.
//!
//! ```text
//! dim 2
//! shape 5 4
//! spacing 2.5000000000000000e-1
//! origin 0.0000000000000000e0 0.0000000000000000e0
//! kind field
//! <v00 v10 v20 v30 v40>
//! ...
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DomainMask, DomainShape, GridSpec, ScalarField};
use crate::report::fmt_g17;

fn write_header(out: &mut String, grid: &GridSpec, kind: &str) {
    out.push_str(&format!("dim {}\n", grid.dim()));
    let shape: Vec<String> = grid.shape().iter().map(|s| s.to_string()).collect();
    out.push_str(&format!("shape {}\n", shape.join(" ")));
    out.push_str(&format!("spacing {}\n", fmt_g17(grid.spacing())));
    let origin: Vec<String> = grid.origin().iter().map(|&v| fmt_g17(v)).collect();
    out.push_str(&format!("origin {}\n", origin.join(" ")));
    out.push_str(&format!("kind {kind}\n"));
}

fn write_rows(out: &mut String, grid: &GridSpec, values: impl Fn(usize) -> String) {
    let nx = grid.nx();
    for y in 0..grid.ny() {
        let row: Vec<String> = (0..nx).map(|x| values(y * nx + x)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

pub fn field_to_string(field: &ScalarField) -> String {
    let mut out = String::new();
    write_header(&mut out, field.grid(), "field");
    write_rows(&mut out, field.grid(), |i| fmt_g17(field.values()[i]));
    out
}

pub fn mask_to_string(mask: &DomainMask) -> String {
    let mut out = String::new();
    write_header(&mut out, mask.grid(), "mask");
    if let Some(spec) = mask.shape_spec() {
        let tail = match spec {
            DomainShape::Interval { a, b } => format!("interval {} {}", fmt_g17(*a), fmt_g17(*b)),
            DomainShape::Rect { x0, y0, x1, y1 } => format!(
                "rect {} {} {} {}",
                fmt_g17(*x0),
                fmt_g17(*y0),
                fmt_g17(*x1),
                fmt_g17(*y1)
            ),
            DomainShape::Disk { cx, cy, radius } => {
                format!("disk {} {} {}", fmt_g17(*cx), fmt_g17(*cy), fmt_g17(*radius))
            }
            DomainShape::Annulus { cx, cy, inner, outer } => format!(
                "annulus {} {} {} {}",
                fmt_g17(*cx),
                fmt_g17(*cy),
                fmt_g17(*inner),
                fmt_g17(*outer)
            ),
            DomainShape::Explicit(_) => "explicit".to_string(),
        };
        out.push_str(&format!("shape_spec {tail}\n"));
    }
    write_rows(&mut out, mask.grid(), |i| if mask.is_inside(i) { "1" } else { "0" }.into());
    write_rows(&mut out, mask.grid(), |i| fmt_g17(mask.sigma(i)));
    out
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| Error::Parse("unexpected end of field file".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok(tokens.collect()),
            other => Err(Error::Parse(format!(
                "expected `{key}` header line, found `{}`",
                other.unwrap_or("")
            ))),
        }
    }
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse(format!("bad float `{tok}`")))
}

fn parse_header(lines: &mut Lines) -> Result<(GridSpec, String)> {
    let dim: usize = lines.keyed("dim")?[0]
        .parse()
        .map_err(|_| Error::Parse("bad dim".into()))?;
    let shape = lines
        .keyed("shape")?
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse("bad shape".into())))
        .collect::<Result<Vec<usize>>>()?;
    let spacing = parse_f64(lines.keyed("spacing")?[0])?;
    let origin = lines
        .keyed("origin")?
        .iter()
        .map(|t| parse_f64(t))
        .collect::<Result<Vec<f64>>>()?;
    let kind = lines.keyed("kind")?.first().map(|s| s.to_string()).unwrap_or_default();
    Ok((GridSpec::new(dim, shape, spacing, origin)?, kind))
}

fn parse_rows<T>(lines: &mut Lines, grid: &GridSpec, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.ny() {
        let row = lines.next_line()?;
        for tok in row.split_whitespace() {
            values.push(parse(tok)?);
        }
    }
    if values.len() != grid.len() {
        return Err(Error::Parse(format!(
            "expected {} values, found {}",
            grid.len(),
            values.len()
        )));
    }
    Ok(values)
}

pub fn field_from_string(text: &str) -> Result<ScalarField> {
    let mut lines = Lines { inner: text.lines() };
    let (grid, kind) = parse_header(&mut lines)?;
    if kind != "field" {
        return Err(Error::Parse(format!("expected kind field, found `{kind}`")));
    }
    let values = parse_rows(&mut lines, &grid, parse_f64)?;
    ScalarField::new(grid, values)
}

pub fn mask_from_string(text: &str) -> Result<DomainMask> {
    let mut lines = Lines { inner: text.lines() };
    let (grid, kind) = parse_header(&mut lines)?;
    if kind != "mask" {
        return Err(Error::Parse(format!("expected kind mask, found `{kind}`")));
    }
    // optional shape_spec line
    let mut peek = lines.inner.clone();
    let mut shape = None;
    if let Some(line) = peek.next() {
        let mut toks = line.split_whitespace();
        if toks.next() == Some("shape_spec") {
            lines.inner = peek;
            let rest: Vec<&str> = toks.collect();
            shape = Some(parse_shape_spec(&rest)?);
        }
    }
    let inside = parse_rows(&mut lines, &grid, |t| match t {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse(format!("bad inside flag `{other}`"))),
    })?;
    let sigma = parse_rows(&mut lines, &grid, parse_f64)?;
    let mask = DomainMask::from_parts(grid, inside, shape)?;
    for i in 0..mask.grid().len() {
        if (mask.sigma(i) - sigma[i]).abs() > 1e-12 * (1.0 + sigma[i].abs()) {
            return Err(Error::Parse(format!(
                "stored sigma disagrees with the distance transform at index {i}"
            )));
        }
    }
    Ok(mask)
}

fn parse_shape_spec(tokens: &[&str]) -> Result<DomainShape> {
    let need = |n: usize| -> Result<Vec<f64>> {
        if tokens.len() != n + 1 {
            return Err(Error::Parse("wrong shape_spec parameter count".into()));
        }
        tokens[1..].iter().map(|t| parse_f64(t)).collect()
    };
    match tokens.first() {
        Some(&"interval") => {
            let v = need(2)?;
            Ok(DomainShape::Interval { a: v[0], b: v[1] })
        }
        Some(&"rect") => {
            let v = need(4)?;
            Ok(DomainShape::Rect { x0: v[0], y0: v[1], x1: v[2], y1: v[3] })
        }
        Some(&"disk") => {
            let v = need(3)?;
            Ok(DomainShape::Disk { cx: v[0], cy: v[1], radius: v[2] })
        }
        Some(&"annulus") => {
            let v = need(4)?;
            Ok(DomainShape::Annulus { cx: v[0], cy: v[1], inner: v[2], outer: v[3] })
        }
        Some(&"explicit") => Err(Error::Parse(
            "explicit masks round-trip through the flag block, not shape_spec".into(),
        )),
        other => Err(Error::Parse(format!("unknown shape_spec `{}`", other.unwrap_or(&"")))),
    }
}

pub fn save_field(field: &ScalarField, path: &Path) -> Result<()> {
    fs::write(path, field_to_string(field))?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    field_from_string(&fs::read_to_string(path)?)
}

pub fn save_mask(mask: &DomainMask, path: &Path) -> Result<()> {
    fs::write(path, mask_to_string(mask))?;
    Ok(())
}

pub fn load_mask(path: &Path) -> Result<DomainMask> {
    mask_from_string(&fs::read_to_string(path)?)
}
