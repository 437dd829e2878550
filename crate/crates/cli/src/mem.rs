//! MIF directories: `<dir>/<global>.mif`, one file per global.

use std::fs;
use std::path::Path;

use lf_core::interp::mif::{bank_from_mif, bank_to_mif};
use lf_core::interp::ScalarKind;
use lf_core::{IrModule, MemoryImage};

use crate::Failure;

/// The module's starting image with any `<global>.mif` found in `dir`
/// loaded over the initializer.
pub fn load_image(m: &IrModule, dir: Option<&Path>) -> Result<MemoryImage, Failure> {
    let mut img = MemoryImage::from_module(m).map_err(Failure::diag)?;
    let Some(dir) = dir else { return Ok(img) };
    if !dir.is_dir() {
        return Err(Failure::Io(format!("{}: not a directory", dir.display())));
    }
    for g in &m.globals {
        let path = dir.join(format!("{}.mif", g.name));
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let kind = ScalarKind::of(&g.ty).expect("image exists for every global");
        let len = img.get(&g.name).map_or(0, |b| b.len());
        let bank = bank_from_mif(&text, kind, Some(len)).map_err(|e| Failure::Mif(path.display().to_string(), e))?;
        img.insert(&g.name, bank);
    }
    Ok(img)
}

/// Writes the named banks of `img` as MIF files; returns the paths.
pub fn store_image(img: &MemoryImage, names: &[String], dir: &Path) -> Result<Vec<String>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for name in names {
        let Some(bank) = img.get(name) else { continue };
        let path = dir.join(format!("{name}.mif"));
        fs::write(&path, bank_to_mif(bank)).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        written.push(path.display().to_string());
    }
    Ok(written)
}
