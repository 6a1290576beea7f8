use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Reads a PNG as a `[1,H,W]` gray image in [0,1]. Color images are
/// reduced to luma; alpha is dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let samples: Vec<f32> = match info.bit_depth {
        BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 65535.0)
            .collect(),
        BitDepth::Eight => buf[..info.buffer_size()].iter().map(|&b| b as f32 / 255.0).collect(),
        d => return Err(Error::Invalid(format!("{}: unsupported bit depth {d:?}", path.display()))),
    };
    let stride = samples.len() / (w * h);
    let data = samples
        .chunks_exact(stride)
        .map(|px| match info.color_type {
            ColorType::Rgb | ColorType::Rgba if channels >= 3 => 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2],
            _ => px[0],
        })
        .collect();
    Tensor::new([1, h, w], data)
}

/// Writes a `[1,H,W]` (or `[H,W]`) image as 8-bit gray, clamping to [0,1].
pub fn save_png(path: impl AsRef<Path>, image: &Tensor<f32>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = match image.dims() {
        [1, h, w] | [h, w] => (*h, *w),
        d => return Err(Error::shape("save_png", format!("expected [1,H,W], got {d:?}"))),
    };
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(ColorType::Grayscale);
    enc.set_depth(BitDepth::Eight);
    let bytes: Vec<u8> = image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let mut writer = enc.write_header()?;
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}
