//! Versioned binary model file.
//!
//! ```text
//! "NGLID"                magic, 5 bytes
//! u16                    format version
//! u32                    CRC-32 of everything after this field
//! u8 n_min, u8 n_max
//! f64 alpha, f64 threshold
//! u8 language count, then per language:
//!     u8 len + code bytes, f64 log-prior, f64 unseen log-prob per order
//! u64 record count, then records sorted by (language code, gram):
//!     u8 language index, u16 len + gram bytes, f64 log-prob
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use super::model::NGramLidModel;
use super::LidError;
use crate::lang::LanguageCode;

pub const MAGIC: &[u8; 5] = b"NGLID";
pub const FORMAT_VERSION: u16 = 1;

impl NGramLidModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = Vec::new();
        body.push(self.n_min as u8);
        body.push(self.n_max as u8);
        body.extend_from_slice(&self.alpha.to_le_bytes());
        body.extend_from_slice(&self.threshold.to_le_bytes());
        body.push(self.languages.len() as u8);
        let orders = self.orders();
        for (li, lang) in self.languages.iter().enumerate() {
            let code = lang.as_str().as_bytes();
            body.push(code.len() as u8);
            body.extend_from_slice(code);
            body.extend_from_slice(&self.log_priors[li].to_le_bytes());
            for o in 0..orders {
                body.extend_from_slice(&self.unseen[li * orders + o].to_le_bytes());
            }
        }
        let mut records = Vec::new();
        for (li, _) in self.languages.iter().enumerate() {
            for (gram, row) in &self.table {
                if let Some(lp) = row[li] {
                    records.push((li as u8, gram.as_str(), lp));
                }
            }
        }
        body.extend_from_slice(&(records.len() as u64).to_le_bytes());
        for (li, gram, lp) in records {
            body.push(li);
            body.extend_from_slice(&(gram.len() as u16).to_le_bytes());
            body.extend_from_slice(gram.as_bytes());
            body.extend_from_slice(&lp.to_le_bytes());
        }

        let mut out = Vec::with_capacity(body.len() + 11);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LidError> {
        if bytes.len() < 5 || &bytes[..5] != MAGIC {
            return Err(LidError::BadMagic);
        }
        let mut r = Reader {
            bytes,
            pos: MAGIC.len(),
        };
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(LidError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let stored = r.u32()?;
        let computed = crc32fast::hash(&bytes[r.pos..]);
        if stored != computed {
            return Err(LidError::Checksum { stored, computed });
        }

        let n_min = r.u8()? as usize;
        let n_max = r.u8()? as usize;
        if n_min == 0 || n_min > n_max {
            return Err(LidError::Corrupt(format!("n-gram range {n_min}..={n_max}")));
        }
        let orders = n_max - n_min + 1;
        let alpha = r.f64()?;
        let threshold = r.f64()?;
        let n_langs = r.u8()? as usize;
        if n_langs == 0 {
            return Err(LidError::Corrupt("model has no languages".into()));
        }
        let mut languages = Vec::with_capacity(n_langs);
        let mut log_priors = Vec::with_capacity(n_langs);
        let mut unseen = Vec::with_capacity(n_langs * orders);
        for _ in 0..n_langs {
            let len = r.u8()? as usize;
            let code = std::str::from_utf8(r.take(len)?)
                .map_err(|e| LidError::Corrupt(e.to_string()))?;
            let lang: LanguageCode = code
                .parse()
                .map_err(|e: crate::lang::UnknownLanguage| LidError::Corrupt(e.to_string()))?;
            if languages.contains(&lang) {
                return Err(LidError::Corrupt(format!("duplicate language {lang}")));
            }
            languages.push(lang);
            log_priors.push(r.f64()?);
            for _ in 0..orders {
                unseen.push(r.f64()?);
            }
        }
        let n_records = r.u64()?;
        let mut table: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        for _ in 0..n_records {
            let li = r.u8()? as usize;
            if li >= n_langs {
                return Err(LidError::Corrupt(format!("language index {li} out of range")));
            }
            let len = r.u16()? as usize;
            let gram = std::str::from_utf8(r.take(len)?)
                .map_err(|e| LidError::Corrupt(e.to_string()))?;
            let n = gram.chars().count();
            if n < n_min || n > n_max {
                return Err(LidError::Corrupt(format!("gram {gram:?} outside n-gram range")));
            }
            let lp = r.f64()?;
            table
                .entry(gram.to_string())
                .or_insert_with(|| vec![None; n_langs])[li] = Some(lp);
        }
        if r.pos != bytes.len() {
            return Err(LidError::Corrupt("trailing bytes after records".into()));
        }
        Ok(NGramLidModel {
            languages,
            n_min,
            n_max,
            alpha,
            threshold,
            log_priors,
            unseen,
            table,
        })
    }
}

pub fn save_model(model: &NGramLidModel, path: impl AsRef<Path>) -> Result<(), LidError> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NGramLidModel, LidError> {
    NGramLidModel::from_bytes(&std::fs::read(path)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LidError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| LidError::Corrupt("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, LidError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, LidError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, LidError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LidError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, LidError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
