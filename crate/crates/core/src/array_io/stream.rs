use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use super::{in_file, read_header, ArrayHeader, Dtype};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Precision};

struct Source {
    path: PathBuf,
    header: ArrayHeader,
}

/// Sequential reader yielding m × (≤ n_b) batches across one or more feature
/// files. Only the batch being assembled is resident.
pub struct BatchStream {
    sources: Vec<Source>,
    batch_capacity: usize,
    m: usize,
    dtype: Dtype,
    current: usize,
    reader: Option<BufReader<File>>,
    /// Rows left to read from `sources[current]`.
    remaining_in_source: usize,
    cursor: usize,
    total: usize,
    peak_resident: usize,
}

impl BatchStream {
    /// Opens all sources, checking headers, shared `m` and dtype, and that
    /// each file holds exactly the data its header declares.
    pub fn open<P: AsRef<Path>>(paths: &[P], batch_capacity: usize) -> Result<Self> {
        if batch_capacity == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if paths.is_empty() {
            return Err(Error::Config("no input files given".into()));
        }
        let mut sources = Vec::with_capacity(paths.len());
        for p in paths {
            let path = p.as_ref().to_path_buf();
            let header = read_header(&path)?;
            let expected = header
                .data_len()
                .and_then(|d| d.checked_add(header.data_offset))
                .ok_or_else(|| {
                    Error::Format(format!("{}: declared shape overflows", path.display()))
                })?;
            let actual = std::fs::metadata(&path)
                .map_err(|e| Error::io(&path, e))?
                .len();
            if actual != expected as u64 {
                return Err(Error::Data(format!(
                    "{}: file is {actual} bytes but its header implies {expected}",
                    path.display()
                )));
            }
            sources.push(Source { path, header });
        }
        let first = sources[0].header;
        for s in &sources[1..] {
            if s.header.m != first.m {
                return Err(Error::Consistency(format!(
                    "{} has {} features per vector, {} has {}",
                    s.path.display(),
                    s.header.m,
                    sources[0].path.display(),
                    first.m
                )));
            }
            if s.header.dtype != first.dtype {
                return Err(Error::Consistency(format!(
                    "{} stores {}, {} stores {}",
                    s.path.display(),
                    s.header.dtype,
                    sources[0].path.display(),
                    first.dtype
                )));
            }
        }
        let total = sources.iter().map(|s| s.header.n_vectors).sum();
        Ok(BatchStream {
            m: first.m,
            dtype: first.dtype,
            sources,
            batch_capacity,
            current: 0,
            reader: None,
            remaining_in_source: 0,
            cursor: 0,
            total,
            peak_resident: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn precision(&self) -> Precision {
        super::precision_of(self.dtype)
    }

    pub fn total_vectors(&self) -> usize {
        self.total
    }

    /// Index of the next vector to be yielded.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn batch_capacity(&self) -> usize {
        self.batch_capacity
    }

    /// Largest number of raw values held at once so far.
    pub fn peak_resident_values(&self) -> usize {
        self.peak_resident
    }

    /// Advances to the next source with rows left, opening it.
    fn ensure_reader(&mut self) -> Result<bool> {
        while self.remaining_in_source == 0 {
            if self.reader.is_some() {
                self.reader = None;
                self.current += 1;
            }
            let Some(src) = self.sources.get(self.current) else {
                return Ok(false);
            };
            if src.header.n_vectors == 0 {
                self.current += 1;
                continue;
            }
            let file = File::open(&src.path).map_err(|e| Error::io(&src.path, e))?;
            let mut reader = BufReader::new(file);
            std::io::copy(
                &mut (&mut reader).take(src.header.data_offset as u64),
                &mut std::io::sink(),
            )
            .map_err(|e| Error::io(&src.path, e))?;
            self.reader = Some(reader);
            self.remaining_in_source = src.header.n_vectors;
        }
        Ok(true)
    }

    /// Returns the next batch, or `None` at end of stream.
    pub fn next_batch(&mut self) -> Result<Option<Matrix>> {
        let mut data: Vec<f64> = Vec::with_capacity(self.batch_capacity.min(self.total) * self.m);
        let mut n = 0;
        let size = self.dtype.size();
        let mut row_bytes = vec![0u8; self.m * size];
        while n < self.batch_capacity && self.ensure_reader()? {
            let src = &self.sources[self.current];
            let row_in_file = src.header.n_vectors - self.remaining_in_source;
            let reader = self.reader.as_mut().expect("reader opened");
            reader
                .read_exact(&mut row_bytes)
                .map_err(|e| match e.kind() {
                    std::io::ErrorKind::UnexpectedEof => Error::Data(format!(
                        "{}: truncated at row {row_in_file}",
                        src.path.display()
                    )),
                    _ => Error::io(&src.path, e),
                })?;
            for (j, chunk) in row_bytes.chunks_exact(size).enumerate() {
                let v = self.dtype.decode(chunk);
                if !v.is_finite() {
                    return Err(in_file(
                        &src.path,
                        Error::Data(format!("non-finite value at row {row_in_file}, column {j}")),
                    ));
                }
                data.push(v);
            }
            self.remaining_in_source -= 1;
            n += 1;
        }
        if n == 0 {
            return Ok(None);
        }
        self.cursor += n;
        self.peak_resident = self.peak_resident.max(data.len());
        Ok(Some(Matrix::from_parts(self.m, n, data, self.precision())))
    }
}

impl Iterator for BatchStream {
    type Item = Result<Matrix>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_batch().transpose()
    }
}
