//! Dataset ingestion: IDX container parsing, digit filtering, quantization to
//! `k` gray levels, and PGM export. A deterministic synthetic digit renderer
//! is included so pipelines can run self-contained when no IDX files are
//! configured.

use rand::Rng;

use crate::diffusion::CategoricalImage;
use crate::rng::seeded;
use crate::{Error, Result};

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw byte-level dataset: `count` images of `rows × cols` pixels plus one
/// label byte per image.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Concatenate two datasets with matching geometry.
    pub fn concat(mut self, other: RawDataset) -> Result<RawDataset> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("datasets differ in image geometry".into()));
        }
        self.images.extend(other.images);
        self.labels.extend(other.labels);
        Ok(self)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Parse the IDX image/label pair (big-endian headers, magic 0x803 / 0x801).
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<RawDataset> {
    let magic = be_u32(image_bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let count = be_u32(image_bytes, 4)? as usize;
    let rows = be_u32(image_bytes, 8)? as usize;
    let cols = be_u32(image_bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if image_bytes.len() != expected {
        return Err(Error::Format(format!(
            "image payload {} bytes, expected {expected}",
            image_bytes.len()
        )));
    }

    let label_magic = be_u32(label_bytes, 0)?;
    if label_magic != IDX_LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label magic {label_magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"
        )));
    }
    let label_count = be_u32(label_bytes, 4)? as usize;
    if label_bytes.len() != 8 + label_count {
        return Err(Error::Format(format!(
            "label payload {} bytes, expected {}",
            label_bytes.len(),
            8 + label_count
        )));
    }
    if label_count != count {
        return Err(Error::Format(format!(
            "{count} images but {label_count} labels"
        )));
    }

    let per_image = rows * cols;
    let images: Vec<Vec<u8>> = (0..count)
        .map(|i| image_bytes[16 + i * per_image..16 + (i + 1) * per_image].to_vec())
        .collect();
    Ok(RawDataset {
        rows,
        cols,
        images,
        labels: label_bytes[8..].to_vec(),
    })
}

/// Serialize back to the IDX byte pair.
pub fn idx_bytes(ds: &RawDataset) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + ds.len() * ds.rows * ds.cols);
    img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    img.extend_from_slice(&(ds.rows as u32).to_be_bytes());
    img.extend_from_slice(&(ds.cols as u32).to_be_bytes());
    for image in &ds.images {
        img.extend_from_slice(image);
    }
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lab.extend_from_slice(&ds.labels);
    (img, lab)
}

/// Quantize 0..=255 grayscale to `k` levels: `level = floor(pixel·k/256)`.
pub fn quantize(ds: &RawDataset, k: usize) -> Result<Vec<CategoricalImage>> {
    if k == 0 || k > 256 {
        return Err(Error::Parameter(format!("k = {k} outside 1..=256")));
    }
    ds.images
        .iter()
        .map(|img| {
            let levels: Vec<u8> = img.iter().map(|&p| ((p as usize * k) / 256) as u8).collect();
            CategoricalImage::new(ds.cols, ds.rows, k, levels)
        })
        .collect()
}

/// Order-preserving subset with the given label.
pub fn filter_digit(ds: &RawDataset, digit: u8) -> Result<RawDataset> {
    if digit > 9 {
        return Err(Error::Parameter(format!("digit {digit} outside 0..=9")));
    }
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (img, &lab) in ds.images.iter().zip(&ds.labels) {
        if lab == digit {
            images.push(img.clone());
            labels.push(lab);
        }
    }
    Ok(RawDataset {
        rows: ds.rows,
        cols: ds.cols,
        images,
        labels,
    })
}

/// Binary PGM ("P5") encoding with `maxval = k - 1`.
pub fn write_pgm(img: &CategoricalImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), img.k() - 1).into_bytes();
    out.extend_from_slice(img.levels());
    out
}

/// Parse a binary PGM produced by [`write_pgm`] (or any whitespace-separated
/// P5 header without comments).
pub fn parse_pgm(bytes: &[u8]) -> Result<CategoricalImage> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Format("not a binary PGM (missing P5)".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::Format("malformed PGM header".into()))?
            .parse()
            .map_err(|_| Error::Format("malformed PGM header".into()))?;
    }
    // Single whitespace byte separates header and payload.
    pos += 1;
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval > 255 {
        return Err(Error::Format("16-bit PGM not supported".into()));
    }
    let payload = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| Error::Format("truncated PGM payload".into()))?;
    CategoricalImage::new(w, h, maxval + 1, payload.to_vec())
}

/// Deterministic synthetic digit renderer at 28×28, used when no IDX files
/// are configured. Digit 0 is an elliptical ring with jittered geometry;
/// other digits get simple distinguishable glyphs.
pub fn synthetic_dataset(digit: u8, count: usize, seed: u64) -> Result<RawDataset> {
    if digit > 9 {
        return Err(Error::Parameter(format!("digit {digit} outside 0..=9")));
    }
    let mut rng = seeded(seed);
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        images.push(render_digit(digit, &mut rng));
    }
    Ok(RawDataset {
        rows: 28,
        cols: 28,
        images,
        labels: vec![digit; count],
    })
}

fn render_digit(digit: u8, rng: &mut impl Rng) -> Vec<u8> {
    let cx = 13.5 + rng.gen_range(-1.5..1.5);
    let cy = 13.5 + rng.gen_range(-1.5..1.5);
    let rx = rng.gen_range(4.5..7.5);
    let ry = rng.gen_range(6.0..9.0);
    let thickness = rng.gen_range(1.1..2.0);
    let peak = rng.gen_range(190.0..255.0);
    let tilt = rng.gen_range(-0.25..0.25);

    let mut img = vec![0u8; 28 * 28];
    for y in 0..28 {
        for x in 0..28 {
            let dx = (x as f64 - cx) + tilt * (y as f64 - cy);
            let dy = y as f64 - cy;
            let value = match digit {
                // Ring: bright where the normalized radius is near 1.
                0 => {
                    let r = ((dx / rx).powi(2) + (dy / ry).powi(2)).sqrt();
                    let d = (r - 1.0) * rx.min(ry);
                    peak * (-(d * d) / (2.0 * thickness * thickness)).exp()
                }
                // Vertical stroke.
                1 => {
                    let d = dx.abs();
                    if dy.abs() < ry {
                        peak * (-(d * d) / (2.0 * thickness * thickness)).exp()
                    } else {
                        0.0
                    }
                }
                // Other digits: ring plus a horizontal chord whose height
                // depends on the digit, enough to tell classes apart.
                d => {
                    let r = ((dx / rx).powi(2) + (dy / ry).powi(2)).sqrt();
                    let ring = (r - 1.0) * rx.min(ry);
                    let chord_y = cy + (d as f64 - 5.0) * 1.3;
                    let chord = (y as f64 - chord_y).abs();
                    let ring_v = peak * (-(ring * ring) / (2.0 * thickness * thickness)).exp();
                    let chord_v = if dx.abs() < rx {
                        peak * (-(chord * chord) / (2.0 * thickness * thickness)).exp()
                    } else {
                        0.0
                    };
                    ring_v.max(chord_v)
                }
            };
            // Crisp stroke support: faint Gaussian tails become background.
            let value = if value < 20.0 { 0.0 } else { value };
            img[y * 28 + x] = value.round().clamp(0.0, 255.0) as u8;
        }
    }
    img
}
