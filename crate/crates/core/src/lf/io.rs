use super::{rgb_to_ycbcr420, ycbcr420_to_rgb, chroma_dims, AngularPos, LightField, Plane, View};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// On-disk description of a light field: grid geometry plus a view filename
/// pattern containing `{u}` and `{v}` placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub pattern: String,
    /// Required for raw `.yuv` views, ignored otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

impl Manifest {
    pub fn view_file(&self, pos: AngularPos) -> String {
        self.pattern
            .replace("{u}", &pos.u.to_string())
            .replace("{v}", &pos.v.to_string())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// File format used when writing views.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViewFormat {
    /// 8-bit RGB PNG (color converted, not lossless for YCbCr).
    Png,
    /// Raw planar 8-bit 4:2:0, bit-exact.
    Yuv,
}

impl ViewFormat {
    fn extension(self) -> &'static str {
        match self {
            ViewFormat::Png => "png",
            ViewFormat::Yuv => "yuv",
        }
    }
}

fn read_view(path: &Path, manifest: &Manifest) -> Result<View> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    if ext == "yuv" {
        let (Some(w), Some(h)) = (manifest.width, manifest.height) else {
            return Err(Error::InvalidArgument(
                "raw .yuv views need width and height in the manifest".into(),
            ));
        };
        let bytes = fs::read(path)?;
        return view_from_yuv(&bytes, w, h);
    }
    let img = image::open(path)?;
    Ok(match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let (w, h) = gray.dimensions();
            View::from_luma(Plane::from_vec(w as usize, h as usize, gray.into_raw())?)
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            let px = rgb.pixels().map(|p| p.0).collect();
            rgb_to_ycbcr420(&Plane::from_vec(w as usize, h as usize, px)?)
        }
    })
}

/// Parses one planar 4:2:0 frame.
pub(crate) fn view_from_yuv(bytes: &[u8], width: usize, height: usize) -> Result<View> {
    let (cw, ch) = chroma_dims(width, height);
    let (ny, nc) = (width * height, cw * ch);
    if bytes.len() != ny + 2 * nc {
        return Err(Error::DimensionMismatch(format!(
            "{} bytes for a {width}x{height} 4:2:0 frame",
            bytes.len()
        )));
    }
    View::new(
        Plane::from_vec(width, height, bytes[..ny].to_vec())?,
        Plane::from_vec(cw, ch, bytes[ny..ny + nc].to_vec())?,
        Plane::from_vec(cw, ch, bytes[ny + nc..].to_vec())?,
    )
}

pub(crate) fn view_to_yuv(view: &View, out: &mut Vec<u8>) {
    for plane in view.planes() {
        out.extend_from_slice(plane.data());
    }
}

/// Loads every view listed by a manifest; paths are relative to its directory.
pub fn load_light_field(manifest_path: &Path) -> Result<LightField> {
    let manifest = Manifest::read(manifest_path)?;
    let dir = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut views = Vec::with_capacity(manifest.grid_rows * manifest.grid_cols);
    for u in 0..manifest.grid_rows {
        for v in 0..manifest.grid_cols {
            let file = dir.join(manifest.view_file(AngularPos::new(u, v)));
            views.push(read_view(&file, &manifest)?);
        }
    }
    LightField::new(manifest.grid_rows, manifest.grid_cols, views)
}

/// Writes all views and a `manifest.json` into `dir`, returning the manifest path.
pub fn save_light_field(lf: &LightField, dir: &Path, format: ViewFormat) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let (w, h) = lf.view_dims();
    let manifest = Manifest {
        grid_rows: lf.rows(),
        grid_cols: lf.cols(),
        pattern: format!("view_{{u}}_{{v}}.{}", format.extension()),
        width: (format == ViewFormat::Yuv).then_some(w),
        height: (format == ViewFormat::Yuv).then_some(h),
    };
    for (pos, view) in lf.iter() {
        let path = dir.join(manifest.view_file(pos));
        match format {
            ViewFormat::Yuv => {
                let mut bytes = Vec::new();
                view_to_yuv(view, &mut bytes);
                fs::write(path, bytes)?;
            }
            ViewFormat::Png => {
                let rgb = ycbcr420_to_rgb(view);
                let raw: Vec<u8> = rgb.data().iter().flatten().copied().collect();
                image::save_buffer(&path, &raw, w as u32, h as u32, image::ColorType::Rgb8)?;
            }
        }
    }
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_lf() -> LightField {
        let views = (0..4)
            .map(|i| {
                let y = Plane::from_fn(6, 4, |r, c| (i * 40 + r * 6 + c) as u8);
                let cb = Plane::from_fn(3, 2, |r, c| (100 + i + r + c) as u8);
                let cr = Plane::from_fn(3, 2, |r, c| (150 - i - r - c) as u8);
                View::new(y, cb, cr).unwrap()
            })
            .collect();
        LightField::new(2, 2, views).unwrap()
    }

    #[test]
    fn yuv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let lf = small_lf();
        let manifest = save_light_field(&lf, dir.path(), ViewFormat::Yuv).unwrap();
        assert_eq!(load_light_field(&manifest).unwrap(), lf);
    }

    #[test]
    fn png_gray_views_load_as_luma() {
        let dir = tempfile::tempdir().unwrap();
        let gray = image::GrayImage::from_fn(5, 3, |x, y| image::Luma([(x * 10 + y) as u8]));
        for u in 0..2 {
            for v in 0..2 {
                gray.save(dir.path().join(format!("view_{u}_{v}.pgm"))).unwrap();
            }
        }
        let manifest = r#"{"grid_rows":2,"grid_cols":2,"pattern":"view_{u}_{v}.pgm"}"#;
        fs::write(dir.path().join("m.json"), manifest).unwrap();
        let lf = load_light_field(&dir.path().join("m.json")).unwrap();
        assert_eq!(lf.view_dims(), (5, 3));
        assert_eq!(lf.view(AngularPos::new(1, 1)).y.at(2, 4), 42);
        assert!(lf.view(AngularPos::new(0, 0)).cb.data().iter().all(|&c| c == 128));
    }

    #[test]
    fn png_round_trip_close_on_gray() {
        let dir = tempfile::tempdir().unwrap();
        let views = (0..4)
            .map(|i| View::from_luma(Plane::from_fn(6, 4, |r, c| (i * 50 + r * 6 + c) as u8)))
            .collect();
        let lf = LightField::new(2, 2, views).unwrap();
        let back = load_light_field(&save_light_field(&lf, dir.path(), ViewFormat::Png).unwrap()).unwrap();
        for ((_, a), (_, b)) in lf.iter().zip(back.iter()) {
            for (x, y) in a.y.data().iter().zip(b.y.data()) {
                assert!(x.abs_diff(*y) <= 1);
            }
        }
    }
}
