//! Index persistence: a descriptor store followed by a partition table.
//!
//! ```text
//! <descriptor store>
//! "GVIX"                           4 bytes
//! centroid count C                 u32 (0 for an exact index)
//! probes                           u32
//! C × D f32 centroids
//! C × (u64 length, length × u64 image_id)
//! ```

use std::collections::HashMap;
use std::path::Path;

use super::{Index, Partitions};
use crate::descriptor::store::{self, Cursor};
use crate::error::{Error, Result};

pub const INDEX_MAGIC: &[u8; 4] = b"GVIX";

pub fn encode_index(index: &Index) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    store::encode_store(&index.records(), &mut out)?;
    out.extend_from_slice(INDEX_MAGIC);
    match &index.partitions {
        None => {
            out.extend_from_slice(&0u32.to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes());
        }
        Some(p) => {
            out.extend_from_slice(&(p.lists.len() as u32).to_le_bytes());
            out.extend_from_slice(&(p.probes as u32).to_le_bytes());
            for &v in &p.centroids {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for list in &p.lists {
                out.extend_from_slice(&(list.len() as u64).to_le_bytes());
                for &pos in list {
                    out.extend_from_slice(&index.meta[pos as usize].image_id.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn decode_index(bytes: &[u8]) -> Result<Index> {
    let (dim, records, end) = store::decode_store(bytes)?;
    let data: Vec<f32> = records
        .iter()
        .flat_map(|r| r.descriptor.as_slice().iter().map(|&v| v as f32))
        .collect();
    let mut index = Index::from_parts(dim, records.iter().map(super::meta_of).collect(), data);

    let mut cur = Cursor::new(bytes, end);
    cur.magic(INDEX_MAGIC)?;
    let count = cur.u32("centroid count")? as usize;
    let probes_at = cur.pos;
    let probes = cur.u32("probes")? as usize;
    if count == 0 {
        return Ok(index);
    }
    if probes == 0 || probes > count {
        return Err(Error::format(probes_at as u64, format!("probes {probes} not in 1..={count}")));
    }
    let mut centroids = Vec::with_capacity(count * dim);
    for _ in 0..count * dim {
        centroids.push(cur.f32("centroid")?);
    }

    let positions: HashMap<u64, u32> = index
        .meta
        .iter()
        .enumerate()
        .map(|(i, m)| (m.image_id, i as u32))
        .collect();
    let mut assigned = vec![false; index.len()];
    let mut lists = Vec::with_capacity(count);
    for _ in 0..count {
        let len_at = cur.pos;
        let len = cur.u64("partition length")?;
        if len > index.len() as u64 {
            return Err(Error::format(len_at as u64, format!("partition length {len} exceeds record count")));
        }
        let mut list = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let at = cur.pos;
            let id = cur.u64("partition entry")?;
            let pos = *positions
                .get(&id)
                .ok_or_else(|| Error::format(at as u64, format!("partition lists unknown image_id {id}")))?;
            if std::mem::replace(&mut assigned[pos as usize], true) {
                return Err(Error::format(at as u64, format!("image_id {id} listed in two partitions")));
            }
            list.push(pos);
        }
        list.sort_unstable();
        lists.push(list);
    }
    if let Some(missing) = assigned.iter().position(|&a| !a) {
        return Err(Error::format(
            cur.pos as u64,
            format!("image_id {} is not in any partition", index.meta[missing].image_id),
        ));
    }
    index.partitions = Some(Partitions { centroids, lists, probes });
    Ok(index)
}

pub fn save_index(index: &Index, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_index(index)?).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Index> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes)
}
