//! Builtin scenario configs, one per symmetry regime.

const BUILTINS: &[(&str, &str)] = &[
    ("reflection-disjoint", include_str!("../../scenarios/reflection-disjoint.json")),
    ("reflection-overlap", include_str!("../../scenarios/reflection-overlap.json")),
    ("c4-corners", include_str!("../../scenarios/c4-corners.json")),
    ("cn-disk", include_str!("../../scenarios/cn-disk.json")),
    ("s2-bump-offdiag", include_str!("../../scenarios/s2-bump-offdiag.json")),
    ("s2-bump-diag", include_str!("../../scenarios/s2-bump-diag.json")),
    ("sd-bump", include_str!("../../scenarios/sd-bump.json")),
];

pub fn names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
