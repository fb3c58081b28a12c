use std::fs::File;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use tiff::decoder::{Decoder as TiffDecoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::ColorType as TiffColor;

use super::{BitDepth, Image};
use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Png,
    Tiff,
}

impl Format {
    fn from_extension(path: &Path) -> Option<Format> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Format::Png),
            "tif" | "tiff" => Some(Format::Tiff),
            _ => None,
        }
    }

    fn sniff(bytes: &[u8]) -> Option<Format> {
        if bytes.starts_with(&PNG_SIGNATURE) {
            Some(Format::Png)
        } else if bytes.starts_with(b"II") || bytes.starts_with(b"MM") {
            Some(Format::Tiff)
        } else {
            None
        }
    }
}

/// Reads an 8- or 16-bit grayscale PNG or TIFF and normalizes samples by `2^depth - 1`.
///
/// Every page of a multi-page TIFF becomes one channel.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match Format::sniff(&bytes) {
        Some(Format::Png) => load_png(path, &bytes),
        Some(Format::Tiff) => load_tiff(path, &bytes),
        None => Err(Error::Decode {
            path: path.to_path_buf(),
            format: "image",
            message: "not a PNG or TIFF file".into(),
        }),
    }
}

fn normalize_u8(samples: &[u8]) -> Vec<f32> {
    samples.iter().map(|&s| (s as f64 / 255.0) as f32).collect()
}

fn normalize_u16(samples: &[u16]) -> Vec<f32> {
    samples
        .iter()
        .map(|&s| (s as f64 / 65535.0) as f32)
        .collect()
}

fn load_png(path: &Path, bytes: &[u8]) -> Result<Image> {
    let decode_err = |e: png::DecodingError| Error::Decode {
        path: path.to_path_buf(),
        format: "PNG",
        message: e.to_string(),
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(decode_err)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            format: "PNG",
            detail: format!("{color:?} (only single-channel grayscale is supported)"),
        });
    }
    let size = reader.output_buffer_size().ok_or_else(|| Error::Decode {
        path: path.to_path_buf(),
        format: "PNG",
        message: "image too large".into(),
    })?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(decode_err)?;
    let (h, w) = (frame.height as usize, frame.width as usize);
    let (data, depth) = match depth {
        png::BitDepth::Eight => (normalize_u8(&buf[..h * w]), BitDepth::Eight),
        png::BitDepth::Sixteen => {
            let samples: Vec<u16> = buf[..h * w * 2]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect();
            (normalize_u16(&samples), BitDepth::Sixteen)
        }
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                format: "PNG",
                detail: format!("{}-bit grayscale", other as u8),
            })
        }
    };
    Image::new(h, w, 1, data, depth)
}

fn load_tiff(path: &Path, bytes: &[u8]) -> Result<Image> {
    let decode_err = |e: tiff::TiffError| Error::Decode {
        path: path.to_path_buf(),
        format: "TIFF",
        message: e.to_string(),
    };
    let unsupported = |detail: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        format: "TIFF",
        detail,
    };
    let mut decoder = TiffDecoder::new(Cursor::new(bytes)).map_err(decode_err)?;
    let mut planes = Vec::new();
    let mut depth = None;
    loop {
        let (w, h) = decoder.dimensions().map_err(decode_err)?;
        let color = decoder.colortype().map_err(decode_err)?;
        let page_depth = match color {
            TiffColor::Gray(8) => BitDepth::Eight,
            TiffColor::Gray(16) => BitDepth::Sixteen,
            other => return Err(unsupported(format!("{other:?}"))),
        };
        if depth.is_some_and(|d| d != page_depth) {
            return Err(unsupported("pages with mixed bit depths".into()));
        }
        depth = Some(page_depth);
        let data = match decoder.read_image().map_err(decode_err)? {
            DecodingResult::U8(v) => normalize_u8(&v),
            DecodingResult::U16(v) => normalize_u16(&v),
            DecodingResult::F16(_) | DecodingResult::F32(_) | DecodingResult::F64(_) => {
                return Err(unsupported("floating-point samples".into()))
            }
            _ => return Err(unsupported("signed or 32/64-bit integer samples".into())),
        };
        planes.push(Image::new(h as usize, w as usize, 1, data, page_depth)?);
        if !decoder.more_images() {
            break;
        }
        decoder.next_image().map_err(decode_err)?;
    }
    Image::from_planes(&planes)
}

/// Quantizes with round-half-away-from-zero at `2^depth - 1`.
fn quantize(v: f32, depth: BitDepth) -> u16 {
    (v.clamp(0.0, 1.0) as f64 * depth.max_value()).round() as u16
}

/// Writes `img` at its recorded bit depth. The format follows the file extension
/// (`.png`, `.tif`, `.tiff`); PNG output is limited to single-channel images.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = Format::from_extension(path).ok_or_else(|| Error::Encode {
        path: path.to_path_buf(),
        format: "image",
        message: "unknown extension (expected .png, .tif or .tiff)".into(),
    })?;
    if format == Format::Png && img.channels() != 1 {
        return Err(Error::Encode {
            path: path.to_path_buf(),
            format: "PNG",
            message: format!(
                "{} channels cannot be stored as grayscale PNG; use TIFF",
                img.channels()
            ),
        });
    }
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Png => save_png(img, path, &mut out)?,
        Format::Tiff => save_tiff(img, path, &mut out)?,
    }
    out.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn save_png<W: Write>(img: &Image, path: &Path, out: W) -> Result<()> {
    let encode_err = |e: png::EncodingError| Error::Encode {
        path: path.to_path_buf(),
        format: "PNG",
        message: e.to_string(),
    };
    let mut encoder = png::Encoder::new(out, img.width() as u32, img.height() as u32);
    encoder.set_color(png::ColorType::Grayscale);
    let bytes: Vec<u8> = match img.depth() {
        BitDepth::Eight => {
            encoder.set_depth(png::BitDepth::Eight);
            img.data()
                .iter()
                .map(|&v| quantize(v, BitDepth::Eight) as u8)
                .collect()
        }
        BitDepth::Sixteen => {
            encoder.set_depth(png::BitDepth::Sixteen);
            img.data()
                .iter()
                .flat_map(|&v| quantize(v, BitDepth::Sixteen).to_be_bytes())
                .collect()
        }
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

fn save_tiff<W: Write + std::io::Seek>(img: &Image, path: &Path, out: W) -> Result<()> {
    let encode_err = |e: tiff::TiffError| Error::Encode {
        path: path.to_path_buf(),
        format: "TIFF",
        message: e.to_string(),
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let mut encoder = TiffEncoder::new(out).map_err(encode_err)?;
    for c in 0..img.channels() {
        let plane = img.plane(c);
        match img.depth() {
            BitDepth::Eight => {
                let samples: Vec<u8> = plane
                    .iter()
                    .map(|&v| quantize(v, BitDepth::Eight) as u8)
                    .collect();
                encoder
                    .write_image::<colortype::Gray8>(w, h, &samples)
                    .map_err(encode_err)?;
            }
            BitDepth::Sixteen => {
                let samples: Vec<u16> = plane
                    .iter()
                    .map(|&v| quantize(v, BitDepth::Sixteen))
                    .collect();
                encoder
                    .write_image::<colortype::Gray16>(w, h, &samples)
                    .map_err(encode_err)?;
            }
        }
    }
    Ok(())
}
