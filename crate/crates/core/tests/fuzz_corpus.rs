//! Replays the checked-in fuzz seeds through the same entry points the fuzz
//! targets exercise.

use std::fs;
use std::path::PathBuf;

use deltastar::{
    parse_float_grid, parse_int_grid, BasisElement, CoefficientProfile, KernelReport, Profile, ResidualReport,
};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read(e.unwrap().path()).unwrap())
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn grid_seeds() {
    let mut accepted = 0;
    for s in seeds("parse_grid") {
        let text = String::from_utf8_lossy(&s);
        accepted += parse_int_grid(&text).is_ok() as usize;
        accepted += parse_float_grid(&text).is_ok() as usize;
    }
    assert!(accepted > 0);
}

#[test]
fn profile_seeds() {
    let mut accepted = 0;
    for s in seeds("parse_profile") {
        let text = String::from_utf8_lossy(&s);
        if let Ok(p) = text.parse::<Profile>() {
            assert_eq!(p.to_string().parse::<Profile>().unwrap(), p);
            accepted += 1;
        }
        accepted += text.parse::<CoefficientProfile>().is_ok() as usize;
    }
    assert!(accepted > 0);
}

#[test]
fn basis_element_seeds() {
    let ok = seeds("basis_element_json")
        .iter()
        .filter(|s| BasisElement::from_json(&String::from_utf8_lossy(s)).is_ok())
        .count();
    assert!(ok > 0);
}

#[test]
fn kernel_report_seeds() {
    let ok = seeds("kernel_report_json")
        .iter()
        .filter(|s| KernelReport::from_json(&String::from_utf8_lossy(s)).is_ok())
        .count();
    assert!(ok > 0);
}

#[test]
fn residual_report_seeds() {
    let ok = seeds("residual_report_json")
        .iter()
        .filter(|s| ResidualReport::from_json(&String::from_utf8_lossy(s)).is_ok())
        .count();
    assert!(ok > 0);
}
