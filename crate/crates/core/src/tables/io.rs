use std::fs;
use std::path::Path;

use super::grid::TableGrid;
use super::stat::StatKind;
use super::{TableMeta, UniversalTable};
use crate::error::{Error, Result};
use crate::loss::MixScheme;

const MAGIC: &[u8; 4] = b"UTBL";
const VERSION: u32 = 1;
// magic, version, 4 tags, 3 sizes, mc_samples, seed, quadrature order
const HEADER_LEN: usize = 4 + 4 + 4 * 4 + 3 * 8 + 8 + 8 + 4;

pub fn table_to_bytes(table: &UniversalTable) -> Vec<u8> {
    let g = table.grid();
    let meta = table.meta();
    let stat = table.stat();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (g.a_values.len() + g.b_values.len() + g.k_values.len() + g.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let mix_tag: u32 = match table.mix() {
        MixScheme::Voting => 0,
        MixScheme::ParameterMixing => 1,
    };
    for tag in [stat.tag(), mix_tag, stat.loss_tag(), stat.link_tag()] {
        out.extend_from_slice(&tag.to_le_bytes());
    }
    for n in [g.a_values.len(), g.b_values.len(), g.k_values.len()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    out.extend_from_slice(&meta.mc_samples.to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());
    out.extend_from_slice(&meta.quadrature_order.to_le_bytes());
    for v in g.a_values.iter().chain(&g.b_values) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &k in &g.k_values {
        out.extend_from_slice(&(k as u64).to_le_bytes());
    }
    for v in table.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| Error::Load("table file is truncated".into()))?;
        self.pos = end;
        Ok(bytes.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.take::<8>().map(f64::from_le_bytes)).collect()
    }
}

pub fn table_from_bytes(buf: &[u8]) -> Result<UniversalTable> {
    let mut r = Reader { buf, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Load("not a table file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Load(format!("unsupported table format version {version} (expected {VERSION})")));
    }
    let (stat_tag, mix_tag, loss_tag, link_tag) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let stat = StatKind::from_tags(stat_tag, loss_tag, link_tag)?;
    let mix = match mix_tag {
        0 => MixScheme::Voting,
        1 => MixScheme::ParameterMixing,
        t => return Err(Error::Load(format!("unknown mix tag {t}"))),
    };
    let (n_a, n_b, n_k) = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
    let meta = TableMeta { mc_samples: r.u64()?, seed: r.u64()?, quadrature_order: r.u32()? };
    let n_values = n_a
        .checked_mul(n_b)
        .and_then(|v| v.checked_mul(n_k.max(1)))
        .ok_or_else(|| Error::Load("grid sizes overflow".into()))?;
    let expected = n_values
        .checked_add(n_a + n_b + n_k)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Load("grid sizes overflow".into()))?;
    if buf.len() != expected {
        return Err(Error::Load(format!(
            "table file has {} bytes but its header implies {expected}",
            buf.len()
        )));
    }
    let a_values = r.f64s(n_a)?;
    let b_values = r.f64s(n_b)?;
    let k_values = (0..n_k)
        .map(|_| r.u64().and_then(|k| u32::try_from(k).map_err(|_| Error::Load(format!("K value {k} too large")))))
        .collect::<Result<Vec<u32>>>()?;
    let values = r.f64s(n_values)?;
    let grid = TableGrid { a_values, b_values, k_values };
    UniversalTable::from_parts(grid, stat, mix, values, meta).map_err(|e| Error::Load(e.to_string()))
}

pub fn save_table(table: &UniversalTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    // write then rename so a crash never leaves a half-written table behind
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, table_to_bytes(table))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<UniversalTable> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    table_from_bytes(&buf).map_err(|e| match e {
        Error::Load(msg) => Error::Load(format!("{}: {msg}", path.display())),
        other => other,
    })
}
