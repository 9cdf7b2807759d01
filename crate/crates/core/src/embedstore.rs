//! Dense embedding storage with a text format and a binary cache.
//!
//! Text: one record per line, `key SP v1 SP ... SP vd`.
//! Binary cache (little-endian): `ALC1`, u32 dim, u64 count, then per record
//! u32 key length, key bytes and `dim` f32 values.

use std::fs::File;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexSet;

use crate::corpus::open_maybe_gzip;
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 4] = b"ALC1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreKind {
    Word,
    Feature,
}

/// Vectors of a fixed dimension keyed by token or feature name, kept in
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    kind: StoreKind,
    keys: IndexSet<String>,
    data: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, kind: StoreKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingStore {
            dim,
            kind,
            keys: IndexSet::new(),
            data: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> StoreKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: StoreKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: &[f64]) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite value {bad} for key {key:?}")));
        }
        if self.keys.contains(&key) {
            return Err(Error::InvalidKey {
                key,
                reason: "duplicate key",
            });
        }
        self.keys.insert(key);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.get_index_of(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.contains(key)
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index_of(key).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn key(&self, i: usize) -> &str {
        &self.keys[i]
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> + '_ {
        self.keys.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> + '_ {
        self.keys
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(k, v)| (k.as_str(), v))
    }

    /// Applies `f` to every vector, keeping keys and order.
    pub fn map_vectors(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut out = EmbeddingStore::new(self.dim, self.kind)?;
        for (k, v) in self.iter() {
            out.insert(k, &f(v))?;
        }
        Ok(out)
    }

    pub fn load_text(path: &Path, expected_dim: Option<usize>, kind: StoreKind) -> Result<Self> {
        Self::read_text(open_maybe_gzip(path)?, path, expected_dim, kind)
    }

    pub fn read_text(
        reader: impl BufRead,
        path: &Path,
        expected_dim: Option<usize>,
        kind: StoreKind,
    ) -> Result<Self> {
        let mut store: Option<EmbeddingStore> = None;
        let mut values = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut fields = line.split_ascii_whitespace();
            let Some(key) = fields.next() else { continue };
            values.clear();
            for f in fields {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("bad value {f:?}")))?;
                if !x.is_finite() {
                    return Err(Error::parse(path, lineno, format!("non-finite value {f:?}")));
                }
                values.push(x);
            }
            let s = match store.as_mut() {
                Some(s) => s,
                None => {
                    let dim = expected_dim.unwrap_or(values.len());
                    store = Some(
                        EmbeddingStore::new(dim, kind)
                            .map_err(|e| Error::parse(path, lineno, e.to_string()))?,
                    );
                    store.as_mut().unwrap()
                }
            };
            if values.len() != s.dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {} values, found {}", s.dim, values.len()),
                ));
            }
            s.insert(key, &values)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        }
        store.ok_or_else(|| Error::invalid(format!("{}: no vectors", path.display())))
    }

    pub fn save_text(&self, path: &Path) -> Result<()> {
        for k in self.keys() {
            validate_key(k)?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_text(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut line = String::new();
        for (k, v) in self.iter() {
            line.clear();
            line.push_str(k);
            for x in v {
                line.push(' ');
                line.push_str(&format_sig6(*x));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        for k in self.keys() {
            validate_key(k)?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(CACHE_MAGIC).map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.len() as u64).to_le_bytes()).map_err(io)?;
        for (k, v) in self.iter() {
            w.write_all(&(k.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(k.as_bytes()).map_err(io)?;
            for x in v {
                w.write_all(&(*x as f32).to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn load_binary(path: &Path, kind: StoreKind) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader::new(std::io::BufReader::new(file), path);
        let magic = r.bytes::<4>()?;
        if &magic != CACHE_MAGIC {
            return Err(Error::invalid(format!("{}: not an embedding cache", path.display())));
        }
        let dim = u32::from_le_bytes(r.bytes()?) as usize;
        let count = u64::from_le_bytes(r.bytes()?);
        let mut store = EmbeddingStore::new(dim, kind)?;
        let mut v = vec![0.0; dim];
        for _ in 0..count {
            let len = u32::from_le_bytes(r.bytes()?) as usize;
            let key = String::from_utf8(r.vec(len)?)
                .map_err(|_| Error::invalid(format!("{}: key is not UTF-8", path.display())))?;
            for x in v.iter_mut() {
                *x = f32::from_le_bytes(r.bytes()?) as f64;
            }
            store.insert(key, &v)?;
        }
        Ok(store)
    }

    /// Loads the binary cache when the file starts with its magic bytes and
    /// the text format otherwise.
    pub fn load(path: &Path, kind: StoreKind) -> Result<Self> {
        let mut head = [0u8; 4];
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let n = f.read(&mut head).map_err(|e| Error::io(path, e))?;
        if n == 4 && &head == CACHE_MAGIC {
            Self::load_binary(path, kind)
        } else {
            Self::load_text(path, None, kind)
        }
    }
}

/// Keys must be non-empty and free of whitespace.
pub fn validate_key(key: &str) -> Result<()> {
    if key.is_empty() {
        return Err(Error::InvalidKey {
            key: key.into(),
            reason: "empty key",
        });
    }
    if key.chars().any(char::is_whitespace) {
        return Err(Error::InvalidKey {
            key: key.into(),
            reason: "keys may not contain whitespace; join n-gram tokens with '_'",
        });
    }
    Ok(())
}

/// Formats with six significant digits, `%g` style.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may carry into the next decade (e.g. 999999.5)
    let sci = format!("{:.5e}", x);
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let (mant, e) = sci.split_once('e').unwrap();
        format!("{}e{}", trim_zeros(mant.to_owned()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Little-endian reader that reports the byte offset of truncation.
pub(crate) struct ByteReader<'p, R> {
    inner: R,
    offset: u64,
    path: &'p Path,
}

impl<'p, R: Read> ByteReader<'p, R> {
    pub(crate) fn new(inner: R, path: &'p Path) -> Self {
        ByteReader {
            inner,
            offset: 0,
            path,
        }
    }

    pub(crate) fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.fill(&mut buf)?;
        Ok(buf)
    }

    pub(crate) fn vec(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.fill(&mut buf)?;
        Ok(buf)
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => {
                    return Err(Error::Truncated {
                        context: self.path.display().to_string(),
                        offset: self.offset + got as u64,
                    })
                }
                Ok(n) => got += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io(self.path, e)),
            }
        }
        self.offset += got as u64;
        Ok(())
    }

    pub(crate) fn at_end(&mut self) -> Result<bool> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(true),
                Ok(_) => return Ok(false),
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io(self.path, e)),
            }
        }
    }
}
