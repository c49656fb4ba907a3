//! Descriptor store files.
//!
//! Binary layout, little-endian:
//!
//! ```text
//! "GVD1"                       4 bytes
//! dimension D                  u32
//! record count N               u64
//! N × record:
//!     image_id                 u64
//!     location_id              u64
//!     lat, lon                 f64, f64
//!     yaw_deg, pitch_deg       f32, f32
//!     descriptor               D × f32
//! ```
//!
//! The CSV interchange form has header
//! `image_id,location_id,lat,lon,yaw,pitch,v0,...,v{D-1}`.

use std::io::Write;
use std::path::Path;

use super::DescriptorVector;
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::index::ReferenceRecord;

pub const STORE_MAGIC: &[u8; 4] = b"GVD1";
const HEADER_LEN: usize = 16;

pub fn record_len(dim: usize) -> usize {
    8 + 8 + 8 + 8 + 4 + 4 + 4 * dim
}

/// Common dimension of `records`, or an error if they disagree.
pub fn uniform_dim(records: &[ReferenceRecord]) -> Result<usize> {
    let dim = records.first().map(|r| r.descriptor.dim()).unwrap_or(0);
    if let Some(r) = records.iter().find(|r| r.descriptor.dim() != dim) {
        return Err(Error::invalid(format!(
            "record {} has dimension {}, expected {dim}",
            r.image_id,
            r.descriptor.dim()
        )));
    }
    Ok(dim)
}

pub fn encode_store(records: &[ReferenceRecord], out: &mut Vec<u8>) -> Result<()> {
    let dim = uniform_dim(records)?;
    out.reserve(HEADER_LEN + records.len() * record_len(dim));
    out.extend_from_slice(STORE_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for r in records {
        out.extend_from_slice(&r.image_id.to_le_bytes());
        out.extend_from_slice(&r.location_id.to_le_bytes());
        out.extend_from_slice(&r.location.lat.to_le_bytes());
        out.extend_from_slice(&r.location.lon.to_le_bytes());
        out.extend_from_slice(&r.yaw.to_le_bytes());
        out.extend_from_slice(&r.pitch.to_le_bytes());
        for &v in r.descriptor.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(())
}

/// Little-endian cursor that reports the byte offset of any failure.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8], pos: usize) -> Self {
        Cursor { bytes, pos }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.bytes.len() as u64,
                format!("truncated {what}: needed {n} bytes at offset {}", self.pos),
            )),
        }
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::format(
                at as u64,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }
}

/// Decode a store from the start of `bytes`. Returns the records, the
/// declared dimension and the offset just past the last record.
pub fn decode_store(bytes: &[u8]) -> Result<(usize, Vec<ReferenceRecord>, usize)> {
    let mut cur = Cursor::new(bytes, 0);
    cur.magic(STORE_MAGIC)?;
    let dim = cur.u32("dimension")? as usize;
    if dim == 0 {
        return Err(Error::format(4, "dimension must be positive"));
    }
    let count = cur.u64("record count")?;
    let available = (bytes.len() - HEADER_LEN) / record_len(dim);
    if count > available as u64 {
        let end = HEADER_LEN + available * record_len(dim);
        return Err(Error::format(
            bytes.len() as u64,
            format!("header declares {count} records but record {available} is truncated (starts at byte {end})"),
        ));
    }
    let mut records = Vec::with_capacity(count as usize);
    let mut values = Vec::with_capacity(dim);
    for _ in 0..count {
        let start = cur.pos as u64;
        let image_id = cur.u64("image_id")?;
        let location_id = cur.u64("location_id")?;
        let lat = cur.f64("lat")?;
        let lon = cur.f64("lon")?;
        let yaw = cur.f32("yaw")?;
        let pitch = cur.f32("pitch")?;
        values.clear();
        for _ in 0..dim {
            values.push(f64::from(cur.f32("descriptor")?));
        }
        let location = GeoPoint::new(lat, lon).map_err(|e| Error::format(start, e.to_string()))?;
        let descriptor = DescriptorVector::new(values.clone()).map_err(|e| Error::format(start, e.to_string()))?;
        records.push(ReferenceRecord {
            image_id,
            location_id,
            location,
            yaw,
            pitch,
            descriptor,
        });
    }
    Ok((dim, records, cur.pos))
}

pub fn write_store(path: impl AsRef<Path>, records: &[ReferenceRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    encode_store(records, &mut bytes)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_store(path: impl AsRef<Path>) -> Result<Vec<ReferenceRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_store(&bytes)?.1)
}

pub fn write_csv<W: Write>(writer: W, records: &[ReferenceRecord]) -> Result<()> {
    let dim = uniform_dim(records)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["image_id", "location_id", "lat", "lon", "yaw", "pitch"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..dim).map(|i| format!("v{i}")));
    let csv_err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.image_id.to_string(),
            r.location_id.to_string(),
            r.location.lat.to_string(),
            r.location.lon.to_string(),
            r.yaw.to_string(),
            r.pitch.to_string(),
        ];
        row.extend(r.descriptor.as_slice().iter().map(|&v| (v as f32).to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv write: {e}")))?;
    Ok(())
}

pub fn write_csv_file(path: impl AsRef<Path>, records: &[ReferenceRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), records)
}

pub fn decode_csv(bytes: &[u8]) -> Result<Vec<ReferenceRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::format(0, format!("unreadable csv header: {e}")))?
        .clone();
    let fixed = ["image_id", "location_id", "lat", "lon", "yaw", "pitch"];
    if header.len() <= fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(Error::format(0, format!("csv header must start with {}", fixed.join(","))));
    }
    let dim = header.len() - fixed.len();
    for (i, h) in header.iter().skip(fixed.len()).enumerate() {
        if h != format!("v{i}") {
            return Err(Error::format(0, format!("csv column {} should be v{i}, found {h:?}", i + fixed.len())));
        }
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let offset = e.position().map(|p| p.byte()).unwrap_or(0);
            Error::format(offset, format!("csv: {e}"))
        })?;
        let offset = row.position().map(|p| p.byte()).unwrap_or(0);
        if row.len() != dim + fixed.len() {
            return Err(Error::format(offset, format!("expected {} fields, found {}", dim + fixed.len(), row.len())));
        }
        let field = |i: usize| &row[i];
        let bad = |i: usize| Error::format(offset, format!("cannot parse column {} value {:?}", &header[i], &row[i]));
        let image_id: u64 = field(0).parse().map_err(|_| bad(0))?;
        let location_id: u64 = field(1).parse().map_err(|_| bad(1))?;
        let lat: f64 = field(2).parse().map_err(|_| bad(2))?;
        let lon: f64 = field(3).parse().map_err(|_| bad(3))?;
        let yaw: f32 = field(4).parse().map_err(|_| bad(4))?;
        let pitch: f32 = field(5).parse().map_err(|_| bad(5))?;
        let values = (fixed.len()..row.len())
            .map(|i| field(i).parse::<f32>().map(f64::from).map_err(|_| bad(i)))
            .collect::<Result<Vec<_>>>()?;
        records.push(ReferenceRecord {
            image_id,
            location_id,
            location: GeoPoint::new(lat, lon).map_err(|e| Error::format(offset, e.to_string()))?,
            yaw,
            pitch,
            descriptor: DescriptorVector::new(values).map_err(|e| Error::format(offset, e.to_string()))?,
        });
    }
    Ok(records)
}

/// Read either format: binary when the file starts with the store magic,
/// CSV otherwise.
pub fn read_any(path: impl AsRef<Path>) -> Result<Vec<ReferenceRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(STORE_MAGIC) {
        Ok(decode_store(&bytes)?.1)
    } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        decode_csv(&bytes)
    } else {
        Err(Error::format(0, format!("{}: not a descriptor store (bad magic) or .csv file", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records() -> Vec<ReferenceRecord> {
        (0..3u64)
            .map(|i| ReferenceRecord {
                image_id: 10 + i,
                location_id: i / 2,
                location: GeoPoint::new(40.44 + i as f64 * 1e-4, -79.99).unwrap(),
                yaw: 30.0 * i as f32,
                pitch: 0.0,
                descriptor: DescriptorVector::new(vec![0.6, -0.8 + i as f64 * 0.1, 0.125]).unwrap().quantized_f32(),
            })
            .collect()
    }

    #[test]
    fn binary_round_trip() {
        let mut bytes = Vec::new();
        encode_store(&records(), &mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 3 * record_len(3));
        let (dim, back, end) = decode_store(&bytes).unwrap();
        assert_eq!((dim, end), (3, bytes.len()));
        assert_eq!(back, records());
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &records()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("image_id,location_id,lat,lon,yaw,pitch,v0,v1,v2\n"));
        assert_eq!(decode_csv(&buf).unwrap(), records());
    }

    #[test]
    fn wrong_magic_is_reported_at_offset_zero() {
        let mut bytes = Vec::new();
        encode_store(&records(), &mut bytes).unwrap();
        bytes[0] = b'X';
        let err = decode_store(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
    }

    #[test]
    fn truncation_names_the_offset() {
        let mut bytes = Vec::new();
        encode_store(&records(), &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 5);
        let err = decode_store(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Format { .. }));
        assert!(msg.contains(&format!("byte {}", 16 + 2 * record_len(3))), "{msg}");
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let text = "image_id,location_id,lat,lon,yaw,pitch,v0\n1,1,0,0,0,0,0.5\n2,1,0,0,0,0,abc\n";
        let err = decode_csv(text.as_bytes()).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset as usize, text.find("2,1").unwrap()),
            other => panic!("{other}"),
        }
        assert!(decode_csv(b"a,b\n1,2\n").is_err());
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let mut r = records();
        r[1].descriptor = DescriptorVector::new(vec![1.0]).unwrap();
        assert!(encode_store(&r, &mut Vec::new()).is_err());
    }
}
