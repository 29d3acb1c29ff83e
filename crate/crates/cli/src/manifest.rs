//! Expected shapes of the UCI benchmark datasets.
//!
//! A dataset whose name matches an entry (case-insensitively, by abbreviation
//! or full name) must load with exactly these feature, row and class counts.

use awdf::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: &'static str,
    pub abbreviation: &'static str,
    pub n_features: usize,
    pub n_rows: usize,
    pub n_classes: usize,
}

const fn entry(name: &'static str, abbreviation: &'static str, m: usize, n: usize, c: usize) -> ManifestEntry {
    ManifestEntry {
        name,
        abbreviation,
        n_features: m,
        n_rows: n,
        n_classes: c,
    }
}

pub const MANIFEST: &[ManifestEntry] = &[
    entry("Adult Income", "Adult", 14, 48842, 2),
    entry("Car", "Car", 6, 1728, 4),
    entry("Diabetic Retinopathy", "Diabet", 20, 1151, 2),
    entry("EEG Eye State", "EEG", 15, 14980, 2),
    entry("Haberman's Breast Cancer Survival", "Haberman", 3, 306, 2),
    entry("Ionosphere", "Ion", 34, 351, 2),
    entry("Seeds", "Seeds", 7, 210, 3),
    entry("Seismic Mining", "Seismic", 19, 2584, 2),
    entry("Teaching Assistant Evaluation", "TAE", 5, 151, 3),
    entry("Tic-Tac-Toe Endgame", "TTTE", 9, 958, 2),
    entry("Website Phishing", "Website", 30, 2456, 3),
    entry("Wholesale Customer Region", "WCR", 8, 440, 3),
    entry("Letter", "Letter", 16, 20000, 26),
    entry("Yeast", "Yeast", 8, 1484, 10),
    entry("Nursery", "Nursery", 8, 12960, 5),
    entry("Ecoli", "Ecoli", 8, 336, 8),
    entry("Dermatology", "Dermatology", 33, 366, 6),
    entry("IMDB", "IMDB", 5000, 50000, 2),
];

pub fn lookup(name: &str) -> Option<&'static ManifestEntry> {
    let key = name.trim().to_ascii_lowercase();
    MANIFEST.iter().find(|e| {
        e.abbreviation.to_ascii_lowercase() == key
            || e.name.to_ascii_lowercase() == key
            || (e.abbreviation == "Ion" && key == "ionosphere")
    })
}

/// Checks `ds` against the manifest entry for `name`, if there is one.
pub fn check(name: &str, ds: &Dataset) -> Result<(), String> {
    let Some(e) = lookup(name) else {
        return Ok(());
    };
    let found = (ds.n_features(), ds.n_rows(), ds.class_count());
    let expected = (e.n_features, e.n_rows, e.n_classes);
    if found != expected {
        return Err(format!(
            "{name}: expected m={}, n={}, C={} but loaded m={}, n={}, C={}",
            expected.0, expected.1, expected.2, found.0, found.1, found.2
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_either_name() {
        assert_eq!(lookup("haberman").unwrap().n_rows, 306);
        assert_eq!(lookup("ionosphere").unwrap().n_features, 34);
        assert_eq!(lookup("TAE").unwrap().n_classes, 3);
        assert!(lookup("toy").is_none());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let ds = Dataset::new("seeds", vec![0.0, 1.0], 1, vec![0, 1], 2).unwrap();
        assert!(check("seeds", &ds).is_err());
        assert!(check("toy", &ds).is_ok());
    }
}
