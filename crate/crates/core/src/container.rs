//! Binary containers for form fields, boundary forms and media.
//!
//! Every file starts with a 4-byte magic, a version byte and an endianness
//! byte (`0` little, `1` big); all later numbers use that byte order.
//! Writers always emit little-endian.
//!
//! * form `FPFM`: order tag (u8, `0` = lexicographic), N, q (u32), L (f64),
//!   n (u32), periodic (u8), then C(N,q) fields of `n^N` complex values
//!   `(re, im)` in row-major node order.
//! * boundary `FPBD`: N-1, q (u32), L (f64), n (u32), then C(N-1,q) fields.
//! * media `FPMD`: N, q (u32), kind (u8: 0 identity, 1 catalog, 2 dense),
//!   decay class (u8: 0 none, 1 first, 2 second), τ (f64), smoothness m
//!   (u32, `u32::MAX` = unbounded); catalog: tag (u32), parameter (f64);
//!   dense: L (f64), n (u32), then C² real fields of `ε̂` entries in
//!   row-major entry order, each `n^N` values.

use std::io::{Read, Write};

use byteorder::{BigEndian, ByteOrder, LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::form::FormField;
use crate::grid::GridSpec;
use crate::halfspace::BoundaryForm;
use crate::media::{make_transformation, CatalogMedium, DecayClass, MatrixField, MediaKind, MediaSpec, Transformation};
use crate::multi_index::{binomial, Basis};

const FORM_MAGIC: &[u8; 4] = b"FPFM";
const BOUNDARY_MAGIC: &[u8; 4] = b"FPBD";
const MEDIA_MAGIC: &[u8; 4] = b"FPMD";
const VERSION: u8 = 1;
const LEXICOGRAPHIC: u8 = 0;

/// Reader that honours the endianness tag of the header.
struct Decoder<R> {
    inner: R,
    big: bool,
}

impl<R: Read> Decoder<R> {
    fn open(mut inner: R, magic: &[u8; 4]) -> Result<Self> {
        let mut found = [0u8; 4];
        inner.read_exact(&mut found)?;
        if &found != magic {
            return Err(Error::Format(format!(
                "expected magic {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&found)
            )));
        }
        let version = inner.read_u8()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let big = match inner.read_u8()? {
            0 => false,
            1 => true,
            t => return Err(Error::Format(format!("bad endianness tag {t}"))),
        };
        Ok(Decoder { inner, big })
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.inner.read_u8()?)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(if self.big {
            self.inner.read_u32::<BigEndian>()?
        } else {
            self.inner.read_u32::<LittleEndian>()?
        })
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(if self.big {
            self.inner.read_f64::<BigEndian>()?
        } else {
            self.inner.read_f64::<LittleEndian>()?
        })
    }

    fn f64s(&mut self, len: usize) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; len * 8];
        self.inner.read_exact(&mut raw)?;
        let mut out = vec![0.0; len];
        if self.big {
            BigEndian::read_f64_into(&raw, &mut out);
        } else {
            LittleEndian::read_f64_into(&raw, &mut out);
        }
        Ok(out)
    }

    fn complex_fields(&mut self, count: usize, len: usize) -> Result<Vec<Vec<Complex64>>> {
        (0..count)
            .map(|_| {
                let flat = self.f64s(2 * len)?;
                Ok(flat.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
            })
            .collect()
    }

    fn finish(mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        if self.inner.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        Ok(())
    }
}

fn header<W: Write>(w: &mut W, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    w.write_u8(VERSION)?;
    w.write_u8(0)?;
    Ok(())
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    Ok(w.write_u32::<LittleEndian>(v)?)
}

fn put_complex<W: Write>(w: &mut W, fields: &[Vec<Complex64>]) -> Result<()> {
    for field in fields {
        for v in field {
            w.write_f64::<LittleEndian>(v.re)?;
            w.write_f64::<LittleEndian>(v.im)?;
        }
    }
    Ok(())
}

pub fn write_form<W: Write>(mut w: W, e: &FormField) -> Result<()> {
    let g = e.grid();
    header(&mut w, FORM_MAGIC)?;
    w.write_u8(LEXICOGRAPHIC)?;
    put_u32(&mut w, g.dim())?;
    put_u32(&mut w, e.rank())?;
    w.write_f64::<LittleEndian>(g.half_length())?;
    put_u32(&mut w, g.points())?;
    w.write_u8(u8::from(g.is_periodic()))?;
    put_complex(&mut w, e.components())
}

pub fn read_form<R: Read>(r: R) -> Result<FormField> {
    let mut d = Decoder::open(r, FORM_MAGIC)?;
    let order = d.u8()?;
    if order != LEXICOGRAPHIC {
        return Err(Error::Format(format!("unknown multi-index order tag {order}")));
    }
    let dim = d.usize()?;
    let rank = d.usize()?;
    let half_length = d.f64()?;
    let points = d.usize()?;
    let periodic = d.u8()? != 0;
    let grid = GridSpec::new(dim, half_length, points, periodic)?;
    let count = Basis::new(dim, rank)?.len();
    let comps = d.complex_fields(count, grid.len())?;
    d.finish()?;
    FormField::from_components(grid, rank, comps)
}

pub fn write_boundary<W: Write>(mut w: W, b: &BoundaryForm) -> Result<()> {
    let g = b.grid();
    header(&mut w, BOUNDARY_MAGIC)?;
    put_u32(&mut w, g.dim())?;
    put_u32(&mut w, b.rank())?;
    w.write_f64::<LittleEndian>(g.half_length())?;
    put_u32(&mut w, g.points())?;
    put_complex(&mut w, b.components())
}

pub fn read_boundary<R: Read>(r: R) -> Result<BoundaryForm> {
    let mut d = Decoder::open(r, BOUNDARY_MAGIC)?;
    let dim = d.usize()?;
    let rank = d.usize()?;
    let half_length = d.f64()?;
    let points = d.usize()?;
    let grid = GridSpec::periodic(dim, half_length, points)?;
    let comps = d.complex_fields(binomial(dim, rank), grid.len())?;
    d.finish()?;
    BoundaryForm::new(grid, rank, comps)
}

/// Where a stored medium comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MediaSource {
    Identity,
    Catalog(CatalogMedium),
    /// Sampled `ε̂` on a fixed grid.
    Dense(MatrixField),
}

/// Contents of a media file.
#[derive(Clone, Debug, PartialEq)]
pub struct MediaFile {
    pub dim: usize,
    pub rank: usize,
    pub source: MediaSource,
    pub decay: DecayClass,
    pub smoothness: usize,
}

impl MediaFile {
    pub fn catalog(dim: usize, rank: usize, medium: CatalogMedium) -> Self {
        let spec = medium.spec(dim, rank);
        MediaFile {
            dim,
            rank,
            source: MediaSource::Catalog(medium),
            decay: spec.decay,
            smoothness: spec.smoothness,
        }
    }

    /// Realizes the medium on `grid`; dense media must match their stored grid.
    pub fn to_transformation(&self, grid: GridSpec) -> Result<Transformation> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "medium for dimension {} on a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        let kind = match &self.source {
            MediaSource::Identity => MediaKind::Identity,
            MediaSource::Catalog(c) => c.spec(self.dim, self.rank).kind,
            MediaSource::Dense(m) => {
                m.grid().ensure_same(&grid)?;
                MediaKind::Dense(m.clone())
            }
        };
        make_transformation(
            grid,
            self.rank,
            MediaSpec {
                kind,
                smoothness: self.smoothness,
                decay: self.decay,
            },
        )
    }
}

fn decay_tags(decay: DecayClass) -> (u8, f64) {
    match decay {
        DecayClass::None => (0, 0.0),
        DecayClass::FirstKind(t) => (1, t),
        DecayClass::SecondKind(t) => (2, t),
    }
}

pub fn write_media<W: Write>(mut w: W, m: &MediaFile) -> Result<()> {
    header(&mut w, MEDIA_MAGIC)?;
    put_u32(&mut w, m.dim)?;
    put_u32(&mut w, m.rank)?;
    let kind = match m.source {
        MediaSource::Identity => 0,
        MediaSource::Catalog(_) => 1,
        MediaSource::Dense(_) => 2,
    };
    w.write_u8(kind)?;
    let (class, tau) = decay_tags(m.decay);
    w.write_u8(class)?;
    w.write_f64::<LittleEndian>(tau)?;
    w.write_u32::<LittleEndian>(u32::try_from(m.smoothness).unwrap_or(u32::MAX))?;
    match &m.source {
        MediaSource::Identity => {}
        MediaSource::Catalog(c) => {
            w.write_u32::<LittleEndian>(c.tag())?;
            w.write_f64::<LittleEndian>(c.parameter())?;
        }
        MediaSource::Dense(field) => {
            let g = field.grid();
            w.write_f64::<LittleEndian>(g.half_length())?;
            put_u32(&mut w, g.points())?;
            let s2 = field.size() * field.size();
            for entry in 0..s2 {
                for node in 0..g.len() {
                    w.write_f64::<LittleEndian>(field.data()[node * s2 + entry])?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_media<R: Read>(r: R) -> Result<MediaFile> {
    let mut d = Decoder::open(r, MEDIA_MAGIC)?;
    let dim = d.usize()?;
    let rank = d.usize()?;
    let size = Basis::new(dim, rank)?.len();
    let kind = d.u8()?;
    let class = d.u8()?;
    let tau = d.f64()?;
    let decay = match class {
        0 => DecayClass::None,
        1 => DecayClass::FirstKind(tau),
        2 => DecayClass::SecondKind(tau),
        t => return Err(Error::Format(format!("bad decay class {t}"))),
    };
    let smoothness = match d.u32()? {
        u32::MAX => usize::MAX,
        m => m as usize,
    };
    let source = match kind {
        0 => MediaSource::Identity,
        1 => {
            let tag = d.u32()?;
            MediaSource::Catalog(CatalogMedium::from_tag(tag, d.f64()?)?)
        }
        2 => {
            let half_length = d.f64()?;
            let points = d.usize()?;
            let grid = GridSpec::periodic(dim, half_length, points)?;
            let s2 = size * size;
            let by_entry = d.f64s(s2 * grid.len())?;
            let mut data = vec![0.0; by_entry.len()];
            for entry in 0..s2 {
                for node in 0..grid.len() {
                    data[node * s2 + entry] = by_entry[entry * grid.len() + node];
                }
            }
            MediaSource::Dense(MatrixField::from_data(grid, size, data)?)
        }
        t => return Err(Error::Format(format!("unknown media kind {t}"))),
    };
    d.finish()?;
    Ok(MediaFile {
        dim,
        rank,
        source,
        decay,
        smoothness,
    })
}
