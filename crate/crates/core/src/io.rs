//! Line-based text formats for measures and point patterns.
//!
//! ```text
//! measure v1
//! <d> <L> <n>
//! cells <count>
//! <n masses per line, row-major>
//! atoms <count>
//! <x1 .. xd mass>
//! ```
//!
//! Every float is written with 17 significant digits, so parsing a serialized
//! value reproduces it bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::TorusGeometry;
use crate::measure::{Atom, Measure};
use crate::pattern::PointPattern;

/// Round-trip decimal form used in every text format.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize_measure(mu: &Measure) -> String {
    let g = mu.geometry();
    let mut s = String::new();
    writeln!(s, "measure v1").unwrap();
    writeln!(s, "{} {} {}", g.dim(), fmt_f64(g.side()), g.n()).unwrap();
    writeln!(s, "cells {}", mu.cells().len()).unwrap();
    for row in mu.cells().chunks(g.n()) {
        let line: Vec<String> = row.iter().map(|&m| fmt_f64(m)).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    writeln!(s, "atoms {}", mu.atoms().len()).unwrap();
    for a in mu.atoms() {
        let mut fields: Vec<String> = a.position.iter().map(|&x| fmt_f64(x)).collect();
        fields.push(fmt_f64(a.mass));
        writeln!(s, "{}", fields.join(" ")).unwrap();
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), line: 0 }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err(format!("unexpected end of input, expected {what}"))),
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse { line: self.line, msg }
    }

    fn finish(&mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::Parse { line: i + 1, msg: "trailing content".into() });
            }
        }
        Ok(())
    }
}

fn parse_f64(tok: &str, lines: &Lines) -> Result<f64> {
    let x: f64 = tok.parse().map_err(|_| lines.err(format!("bad number `{tok}`")))?;
    if !x.is_finite() {
        return Err(lines.err(format!("non-finite number `{tok}`")));
    }
    Ok(x)
}

fn parse_usize(tok: &str, lines: &Lines) -> Result<usize> {
    tok.parse().map_err(|_| lines.err(format!("bad count `{tok}`")))
}

fn header<'a>(lines: &mut Lines<'a>, magic: &str) -> Result<Vec<&'a str>> {
    let l = lines.next(magic)?;
    if l.trim_end() != magic {
        return Err(lines.err(format!("expected `{magic}`")));
    }
    let l = lines.next("header")?;
    Ok(l.split_whitespace().collect())
}

fn tagged_count(lines: &mut Lines, tag: &str) -> Result<usize> {
    let l = lines.next(tag)?;
    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.len() != 2 || toks[0] != tag {
        return Err(lines.err(format!("expected `{tag} <count>`")));
    }
    parse_usize(toks[1], lines)
}

pub fn parse_measure(text: &str) -> Result<Measure> {
    let mut lines = Lines::new(text);
    let h = header(&mut lines, "measure v1")?;
    if h.len() != 3 {
        return Err(lines.err("expected `d L n`".into()));
    }
    let d = parse_usize(h[0], &lines)?;
    let side = parse_f64(h[1], &lines)?;
    let n = parse_usize(h[2], &lines)?;
    let g = TorusGeometry::with_resolution(d, side, n).map_err(|e| lines.err(e.to_string()))?;
    let count = tagged_count(&mut lines, "cells")?;
    if count != g.cell_count() {
        return Err(lines.err(format!("cell count {count} != n^d = {}", g.cell_count())));
    }
    let mut cells = Vec::with_capacity(count);
    while cells.len() < count {
        let l = lines.next("cell masses")?;
        for tok in l.split_whitespace() {
            if cells.len() == count {
                return Err(lines.err("too many cell masses".into()));
            }
            cells.push(parse_f64(tok, &lines)?);
        }
    }
    let natoms = tagged_count(&mut lines, "atoms")?;
    let mut atoms = Vec::with_capacity(natoms);
    for _ in 0..natoms {
        let l = lines.next("atom")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != d + 1 {
            return Err(lines.err(format!("atom needs {} fields", d + 1)));
        }
        let vals = toks.iter().map(|t| parse_f64(t, &lines)).collect::<Result<Vec<f64>>>()?;
        atoms.push(Atom::new(vals[..d].to_vec(), vals[d]));
    }
    let line = lines.line;
    lines.finish()?;
    Measure::new(g, cells, atoms).map_err(|e| Error::Parse { line, msg: e.to_string() })
}

pub fn serialize_points(p: &PointPattern) -> String {
    let g = p.geometry();
    let mut s = String::new();
    writeln!(s, "points v1").unwrap();
    writeln!(s, "{} {} {}", g.dim(), fmt_f64(g.side()), p.len()).unwrap();
    for pt in p.points() {
        let f: Vec<String> = pt.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(s, "{}", f.join(" ")).unwrap();
    }
    s
}

/// Parses a point file. The file carries no grid size, so the caller supplies it.
pub fn parse_points(text: &str, n: usize) -> Result<PointPattern> {
    let mut lines = Lines::new(text);
    let h = header(&mut lines, "points v1")?;
    if h.len() != 3 {
        return Err(lines.err("expected `d L count`".into()));
    }
    let d = parse_usize(h[0], &lines)?;
    let side = parse_f64(h[1], &lines)?;
    let count = parse_usize(h[2], &lines)?;
    let g = TorusGeometry::with_resolution(d, side, n).map_err(|e| lines.err(e.to_string()))?;
    let mut pts = Vec::with_capacity(count);
    for _ in 0..count {
        let l = lines.next("point")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != d {
            return Err(lines.err(format!("point needs {d} coordinates")));
        }
        let p = toks.iter().map(|t| parse_f64(t, &lines)).collect::<Result<Vec<f64>>>()?;
        if p.iter().any(|&x| x < 0.0 || x >= side) {
            return Err(lines.err("point outside [0, L)".into()));
        }
        pts.push(p);
    }
    lines.finish()?;
    Ok(PointPattern::new(g, pts))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_measure(path: &Path) -> Result<Measure> {
    parse_measure(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Measure {
        let g = TorusGeometry::new(2, 4.0, 4).unwrap();
        let cells = (0..16).map(|i| (i as f64) / 7.0).collect();
        let atoms = vec![Atom::new(vec![1.5, 0.25], 2.0f64.sqrt()), Atom::new(vec![0.1, 3.9], 0.3)];
        Measure::new(g, cells, atoms).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mu = sample();
        let text = serialize_measure(&mu);
        assert_eq!(parse_measure(&text).unwrap(), mu);
        assert_eq!(serialize_measure(&parse_measure(&text).unwrap()), text);
    }

    #[test]
    fn atoms_serialize_sorted() {
        let text = serialize_measure(&sample());
        let atom_lines: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("atoms")).skip(1).collect();
        assert!(atom_lines[0].starts_with("1.0000000000000001e-1"));
    }

    #[test]
    fn strict_parsing() {
        let text = serialize_measure(&sample());
        assert!(parse_measure(&text.replace("measure v1", "measure v2")).is_err());
        assert!(parse_measure(&text.replace("cells 16", "cells 15")).is_err());
        assert!(parse_measure(&text.replace("atoms 2", "atoms 3")).is_err());
        assert!(parse_measure(&format!("{text}junk\n")).is_err());
        let neg = text.replacen("0.0000000000000000e0", "-1.0000000000000000e0", 1);
        assert!(matches!(parse_measure(&neg), Err(Error::Parse { .. })));
    }

    #[test]
    fn points_round_trip() {
        let g = TorusGeometry::new(2, 4.0, 64).unwrap();
        let p = PointPattern::new(g, vec![vec![1.0, 2.0], vec![0.0625, 3.5]]);
        let text = serialize_points(&p);
        assert!(text.starts_with("points v1\n2 4.0000000000000000e0 2\n"));
        assert_eq!(parse_points(&text, 64).unwrap(), p);
    }
}
