//! Built-in example classes, shipped as JSON data files under `presets/` so
//! the inputs stay inspectable.

use crate::stokes::IrregularClass;

pub const PRESETS: &[(&str, &str)] = &[
    ("airy", include_str!("../presets/airy.json")),
    ("cuberoot", include_str!("../presets/cuberoot.json")),
    ("p1h-n1-k1", include_str!("../presets/p1h-n1-k1.json")),
    ("p1h-n1-k3", include_str!("../presets/p1h-n1-k3.json")),
    ("p1h-n1-k5", include_str!("../presets/p1h-n1-k5.json")),
    ("p1h-n2-k1", include_str!("../presets/p1h-n2-k1.json")),
    ("p1h-n2-k3", include_str!("../presets/p1h-n2-k3.json")),
    ("p1h-n2-k5", include_str!("../presets/p1h-n2-k5.json")),
    ("multilevel", include_str!("../presets/multilevel.json")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Accepts both the canonical name (`p1h-n2-k3`) and the spaced form
/// (`p1h n=2 k=3`).
pub fn canonical_name(spec: &str) -> String {
    let s = spec.trim().to_lowercase();
    if s.starts_with("p1h") && (s.contains(' ') || s.contains('=')) {
        let mut n = None;
        let mut k = None;
        for tok in s.split([' ', ',', '(', ')']) {
            if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<u32>().ok();
            }
            if let Some(v) = tok.strip_prefix("k=") {
                k = v.parse::<u32>().ok();
            }
        }
        if let (Some(n), Some(k)) = (n, k) {
            return format!("p1h-n{}-k{}", n, k);
        }
    }
    s
}

pub fn preset_json(name: &str) -> Option<&'static str> {
    let canon = canonical_name(name);
    PRESETS.iter().find(|(n, _)| *n == canon).map(|(_, j)| *j)
}

pub fn load(name: &str) -> Option<IrregularClass> {
    preset_json(name).map(|j| serde_json::from_str(j).expect("preset files are valid"))
}
