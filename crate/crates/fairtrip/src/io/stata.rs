//! Stata `.dta` reader for converting the LSAC export to CSV.
//!
//! Handles format 113 to 115 (binary header) and 117 to 119 (tagged
//! header) in either byte order. Labelled numeric values are replaced by
//! their label text unless codes are requested; Stata missing values become
//! empty fields.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarType {
    Str(usize),
    StrL,
    Byte,
    Int,
    Long,
    Float,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Int(i64),
    Float(f64),
    Text(String),
}

/// A decoded `.dta` file.
#[derive(Debug, Clone, PartialEq)]
pub struct DtaFile {
    pub release: u16,
    pub names: Vec<String>,
    /// Value-label set attached to each variable (empty when none).
    pub label_names: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub value_labels: HashMap<String, HashMap<i64, String>>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    little: bool,
}

impl<'a> Cursor<'a> {
    fn bad(&self, what: &str) -> Error {
        Error::Data(format!("malformed .dta file at byte {}: {what}", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| self.bad("unexpected end of file"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn uint(&mut self, n: usize) -> Result<u64> {
        let bytes = self.take(n)?;
        let fold = |acc: u64, &b: &u8| (acc << 8) | u64::from(b);
        Ok(if self.little {
            bytes.iter().rev().fold(0, fold)
        } else {
            bytes.iter().fold(0, fold)
        })
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        if self.take(tag.len())? == tag.as_bytes() {
            Ok(())
        } else {
            self.pos -= tag.len();
            Err(self.bad(&format!("expected `{tag}`")))
        }
    }

    fn seek(&mut self, pos: u64) -> Result<()> {
        let pos = usize::try_from(pos).ok().filter(|&p| p <= self.buf.len());
        self.pos = pos.ok_or_else(|| self.bad("offset past end of file"))?;
        Ok(())
    }
}

fn c_string(bytes: &[u8]) -> String {
    let end = bytes.iter().position(|&b| b == 0).unwrap_or(bytes.len());
    // pre-118 files are Latin-1
    match std::str::from_utf8(&bytes[..end]) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes[..end].iter().map(|&b| char::from(b)).collect(),
    }
}

fn sign_extend(v: u64, bytes: usize) -> i64 {
    let shift = 64 - 8 * bytes as u32;
    ((v << shift) as i64) >> shift
}

fn read_value(cur: &mut Cursor<'_>, ty: VarType, release: u16, strls: &mut Vec<(u64, u64)>) -> Result<Cell> {
    Ok(match ty {
        VarType::Str(n) => Cell::Text(c_string(cur.take(n)?)),
        VarType::StrL => {
            // (v, o) packed as v + o * 2^bits in the file's byte order
            let key = if release == 117 {
                (cur.uint(4)?, cur.uint(4)?)
            } else {
                let bits = if release == 118 { 16 } else { 24 };
                let x = cur.uint(8)?;
                (x & ((1 << bits) - 1), x >> bits)
            };
            strls.push(key);
            Cell::Missing
        }
        VarType::Byte => {
            let v = sign_extend(cur.uint(1)?, 1);
            if v > 100 { Cell::Missing } else { Cell::Int(v) }
        }
        VarType::Int => {
            let v = sign_extend(cur.uint(2)?, 2);
            if v > 32_740 { Cell::Missing } else { Cell::Int(v) }
        }
        VarType::Long => {
            let v = sign_extend(cur.uint(4)?, 4);
            if v > 2_147_483_620 { Cell::Missing } else { Cell::Int(v) }
        }
        VarType::Float => {
            let v = f32::from_bits(cur.uint(4)? as u32);
            if !v.is_finite() || v > f32::from_bits(0x7eff_ffff) {
                Cell::Missing
            } else {
                // shortest f32 text, so 0.1f32 prints as 0.1
                Cell::Float(v.to_string().parse().expect("f32 text parses"))
            }
        }
        VarType::Double => {
            let v = f64::from_bits(cur.uint(8)?);
            if !v.is_finite() || v > f64::from_bits(0x7fdf_ffff_ffff_ffff) { Cell::Missing } else { Cell::Float(v) }
        }
    })
}

fn old_type(code: u8) -> Option<VarType> {
    Some(match code {
        1..=244 => VarType::Str(code.into()),
        251 => VarType::Byte,
        252 => VarType::Int,
        253 => VarType::Long,
        254 => VarType::Float,
        255 => VarType::Double,
        _ => return None,
    })
}

fn new_type(code: u64) -> Option<VarType> {
    Some(match code {
        1..=2045 => VarType::Str(code as usize),
        32768 => VarType::StrL,
        65526 => VarType::Double,
        65527 => VarType::Float,
        65528 => VarType::Long,
        65529 => VarType::Int,
        65530 => VarType::Byte,
        _ => return None,
    })
}

/// Parses one value-label table (everything after the name and padding).
fn label_table(cur: &mut Cursor<'_>, len: usize) -> Result<HashMap<i64, String>> {
    let start = cur.pos;
    let n = cur.uint(4)? as usize;
    let txt_len = cur.uint(4)? as usize;
    if n.checked_mul(8).map_or(true, |b| b + 8 > len) {
        return Err(cur.bad("value-label table size"));
    }
    let offsets = (0..n).map(|_| cur.uint(4)).collect::<Result<Vec<_>>>()?;
    let values = (0..n).map(|_| cur.uint(4).map(|v| sign_extend(v, 4))).collect::<Result<Vec<_>>>()?;
    let text = cur.take(txt_len)?;
    let mut table = HashMap::new();
    for (off, val) in offsets.into_iter().zip(values) {
        let off = off as usize;
        if off >= text.len() {
            return Err(cur.bad("value-label text offset"));
        }
        table.insert(val, c_string(&text[off..]));
    }
    cur.pos = start + len;
    Ok(table)
}

fn read_old(buf: &[u8]) -> Result<DtaFile> {
    let release = u16::from(buf[0]);
    let little = match buf.get(1) {
        Some(1) => false,
        Some(2) => true,
        _ => return Err(Error::Data("malformed .dta file: byte order".into())),
    };
    let mut cur = Cursor { buf, pos: 4, little };
    let k = cur.uint(2)? as usize;
    let n = cur.uint(4)? as usize;
    cur.take(81 + 18)?;
    let types = cur
        .take(k)?
        .iter()
        .map(|&c| old_type(c))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Data("malformed .dta file: variable type".into()))?;
    let names = (0..k).map(|_| cur.take(33).map(c_string)).collect::<Result<Vec<_>>>()?;
    cur.take(2 * (k + 1))?;
    cur.take(k * if release == 113 { 12 } else { 49 })?;
    let label_names = (0..k).map(|_| cur.take(33).map(c_string)).collect::<Result<Vec<_>>>()?;
    cur.take(k * 81)?;
    loop {
        let kind = cur.uint(1)?;
        let len = cur.uint(4)? as usize;
        if kind == 0 && len == 0 {
            break;
        }
        cur.take(len)?;
    }
    let mut strls = Vec::new();
    let mut rows = Vec::with_capacity(n.min(buf.len()));
    for _ in 0..n {
        let row = types
            .iter()
            .map(|&ty| read_value(&mut cur, ty, release, &mut strls))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let mut value_labels = HashMap::new();
    while cur.pos < buf.len() {
        let len = cur.uint(4)? as usize;
        let name = c_string(cur.take(33)?);
        cur.take(3)?;
        value_labels.insert(name, label_table(&mut cur, len)?);
    }
    Ok(DtaFile {
        release,
        names,
        label_names,
        rows,
        value_labels,
    })
}

fn read_new(buf: &[u8]) -> Result<DtaFile> {
    let mut cur = Cursor { buf, pos: 0, little: true };
    cur.expect("<stata_dta><header><release>")?;
    let release: u16 = std::str::from_utf8(cur.take(3)?)
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|r| (117..=119).contains(r))
        .ok_or_else(|| Error::Data("unsupported .dta release".into()))?;
    cur.expect("</release><byteorder>")?;
    cur.little = match cur.take(3)? {
        b"LSF" => true,
        b"MSF" => false,
        _ => return Err(cur.bad("byte order")),
    };
    cur.expect("</byteorder><K>")?;
    let k = cur.uint(if release == 119 { 4 } else { 2 })? as usize;
    cur.expect("</K><N>")?;
    let n = cur.uint(if release == 117 { 4 } else { 8 })? as usize;
    cur.expect("</N><label>")?;
    let label_len = cur.uint(if release == 117 { 1 } else { 2 })? as usize;
    cur.take(label_len)?;
    cur.expect("</label><timestamp>")?;
    let ts_len = cur.uint(1)? as usize;
    cur.take(ts_len)?;
    cur.expect("</timestamp></header><map>")?;
    let map = (0..14).map(|_| cur.uint(8)).collect::<Result<Vec<_>>>()?;
    let name_len = if release == 117 { 33 } else { 129 };

    cur.seek(map[2])?;
    cur.expect("<variable_types>")?;
    let types = (0..k)
        .map(|_| cur.uint(2).map(new_type))
        .collect::<Result<Option<Vec<_>>>>()?
        .ok_or_else(|| Error::Data("malformed .dta file: variable type".into()))?;
    cur.seek(map[3])?;
    cur.expect("<varnames>")?;
    let names = (0..k).map(|_| cur.take(name_len).map(c_string)).collect::<Result<Vec<_>>>()?;
    cur.seek(map[6])?;
    cur.expect("<value_label_names>")?;
    let label_names = (0..k).map(|_| cur.take(name_len).map(c_string)).collect::<Result<Vec<_>>>()?;

    cur.seek(map[9])?;
    cur.expect("<data>")?;
    let mut refs = Vec::new();
    let mut rows = Vec::with_capacity(n.min(buf.len()));
    for _ in 0..n {
        let row = types
            .iter()
            .map(|&ty| read_value(&mut cur, ty, release, &mut refs))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }

    let mut strls = HashMap::new();
    cur.seek(map[10])?;
    cur.expect("<strls>")?;
    while cur.expect("GSO").is_ok() {
        let v = cur.uint(4)?;
        let o = cur.uint(if release == 117 { 4 } else { 8 })?;
        let t = cur.uint(1)?;
        let len = cur.uint(4)? as usize;
        let bytes = cur.take(len)?;
        let text = if t == 130 { c_string(bytes) } else { String::from_utf8_lossy(bytes).into_owned() };
        strls.insert((v, o), text);
    }
    let mut next = refs.into_iter();
    for row in &mut rows {
        for (cell, ty) in row.iter_mut().zip(&types) {
            if *ty == VarType::StrL {
                let key = next.next().expect("one ref per strL cell");
                *cell = match key {
                    (0, 0) => Cell::Text(String::new()),
                    _ => Cell::Text(strls.get(&key).cloned().ok_or_else(|| cur.bad("dangling strL reference"))?),
                };
            }
        }
    }

    let mut value_labels = HashMap::new();
    cur.seek(map[11])?;
    cur.expect("<value_labels>")?;
    while cur.expect("<lbl>").is_ok() {
        let len = cur.uint(4)? as usize;
        let name = c_string(cur.take(name_len)?);
        cur.take(3)?;
        value_labels.insert(name, label_table(&mut cur, len)?);
        cur.expect("</lbl>")?;
    }
    Ok(DtaFile {
        release,
        names,
        label_names,
        rows,
        value_labels,
    })
}

/// Decodes a `.dta` file held in memory.
pub fn parse_dta(buf: &[u8]) -> Result<DtaFile> {
    match buf.first() {
        Some(113..=115) => read_old(buf),
        Some(b'<') => read_new(buf),
        Some(&v) => Err(Error::Data(format!("unsupported .dta format byte {v}"))),
        None => Err(Error::Data("empty .dta file".into())),
    }
}

pub fn read_dta(path: &Path) -> Result<DtaFile> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dta(&buf).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl DtaFile {
    fn field(&self, col: usize, cell: &Cell, use_labels: bool) -> String {
        match cell {
            Cell::Missing => String::new(),
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => {
                let label = use_labels
                    .then(|| self.value_labels.get(&self.label_names[col]))
                    .flatten()
                    .and_then(|t| t.get(v));
                label.cloned().unwrap_or_else(|| v.to_string())
            }
            Cell::Float(v) => {
                let label = (use_labels && v.fract() == 0.0)
                    .then(|| self.value_labels.get(&self.label_names[col]))
                    .flatten()
                    .and_then(|t| t.get(&(*v as i64)));
                label.cloned().unwrap_or_else(|| v.to_string())
            }
        }
    }

    /// Writes the table as CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: W, use_labels: bool) -> Result<()> {
        let to_err = |e: csv::Error| Error::Data(format!("writing CSV: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names).map_err(to_err)?;
        for row in &self.rows {
            let fields = row.iter().enumerate().map(|(c, cell)| self.field(c, cell, use_labels));
            w.write_record(fields).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing CSV: {e}")))
    }
}

/// Converts `input` (`.dta`) to a CSV file at `output`.
pub fn convert_stata(input: &Path, output: &Path, use_labels: bool) -> Result<usize> {
    let dta = read_dta(input)?;
    let file = std::fs::File::create(output).map_err(|e| Error::io(output, e))?;
    dta.write_csv(std::io::BufWriter::new(file), use_labels)?;
    Ok(dta.rows.len())
}
