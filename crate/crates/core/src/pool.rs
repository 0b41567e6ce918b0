//! The deduplicated field pool and its seeded sampler.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::field::{FieldError, FieldSpec};
use crate::rng::SeededRng;

mod builtin;

pub use builtin::BUILTIN_POOL_SIZE;

/// Order-independent identity of a field configuration.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalKey(pub String);

/// Serializes `field` with lexicographically sorted keys, so two fields that
/// differ only in attribute order map to the same key.
pub fn canonicalize(field: &FieldSpec) -> CanonicalKey {
    // serde_json's default map is a BTreeMap, so the round trip through
    // `Value` sorts every object's keys.
    let value = serde_json::to_value(field).expect("FieldSpec serializes");
    CanonicalKey(value.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Builtin,
    File,
    LlmGenerated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldPool {
    entries: Vec<FieldSpec>,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoolError {
    #[error("pool document is malformed at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("pool record {index} is malformed: {message}")]
    Record { index: usize, message: String },
    #[error("pool record {index} violates a field invariant: {source}")]
    Invalid { index: usize, source: FieldError },
}

impl FieldPool {
    /// Validates every entry and drops later duplicates (by canonical key),
    /// keeping source order.
    pub fn from_entries(entries: Vec<FieldSpec>, provenance: Provenance) -> Result<Self, PoolError> {
        let mut seen = BTreeSet::new();
        let mut kept = Vec::with_capacity(entries.len());
        for (index, entry) in entries.into_iter().enumerate() {
            entry
                .validate()
                .map_err(|source| PoolError::Invalid { index, source })?;
            if seen.insert(canonicalize(&entry)) {
                kept.push(entry);
            }
        }
        Ok(Self {
            entries: kept,
            provenance,
        })
    }

    /// Parses a JSON list of field records. Blank input is an empty pool.
    pub fn parse(text: &str, provenance: Provenance) -> Result<Self, PoolError> {
        if text.trim().is_empty() {
            return Ok(Self {
                entries: Vec::new(),
                provenance,
            });
        }
        let values: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| PoolError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        let mut entries = Vec::with_capacity(values.len());
        for (index, value) in values.into_iter().enumerate() {
            let field: FieldSpec = serde_json::from_value(value).map_err(|e| PoolError::Record {
                index,
                message: e.to_string(),
            })?;
            entries.push(field);
        }
        Self::from_entries(entries, provenance)
    }

    pub fn builtin() -> Self {
        Self::from_entries(builtin::entries(), Provenance::Builtin)
            .expect("builtin pool entries are valid")
    }

    pub fn dump(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("pool serializes")
    }

    pub fn entries(&self) -> &[FieldSpec] {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

impl CountRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }
}

impl Default for CountRange {
    fn default() -> Self {
        Self::new(3, 10)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("invalid count range {min}..={max}: need 1 <= min <= max")]
    InvalidRange { min: usize, max: usize },
    #[error("pool of {available} entries cannot supply {requested} fields")]
    PoolTooSmall { available: usize, requested: usize },
}

/// Draws between `range.min` and `range.max` distinct pool entries.
///
/// Sampling is without replacement; the count and the draw order are fixed
/// by `seed`. Name collisions in the result get a `_2`, `_3`, ... suffix (ids
/// likewise), so sampled names are unique.
pub fn sample_fields(pool: &FieldPool, range: CountRange, seed: u64) -> Result<Vec<FieldSpec>, SampleError> {
    sample_fields_with(pool, range, seed, |_, _| true)
}

/// [`sample_fields`] with an admission rule: `admit(candidate, accepted)`
/// may reject a drawn entry, in which case the next entry of the seeded
/// permutation is tried.
pub fn sample_fields_with<F>(
    pool: &FieldPool,
    range: CountRange,
    seed: u64,
    mut admit: F,
) -> Result<Vec<FieldSpec>, SampleError>
where
    F: FnMut(&FieldSpec, &[FieldSpec]) -> bool,
{
    if range.min == 0 || range.min > range.max {
        return Err(SampleError::InvalidRange {
            min: range.min,
            max: range.max,
        });
    }
    let n = pool.len();
    if n < range.max {
        return Err(SampleError::PoolTooSmall {
            available: n,
            requested: range.max,
        });
    }
    let mut rng = SeededRng::new(seed);
    let k = rng.range_inclusive(range.min, range.max);
    let mut order: Vec<usize> = (0..n).collect();
    let mut picked: Vec<FieldSpec> = Vec::with_capacity(k);
    // Lazy Fisher-Yates: position i is fixed on the i-th draw.
    for i in 0..n {
        if picked.len() == k {
            break;
        }
        let j = i + rng.index(n - i);
        order.swap(i, j);
        let candidate = &pool.entries[order[i]];
        if admit(candidate, &picked) {
            picked.push(candidate.clone());
        }
    }
    if picked.len() < k {
        return Err(SampleError::PoolTooSmall {
            available: picked.len(),
            requested: k,
        });
    }
    uniquify(&mut picked);
    Ok(picked)
}

fn uniquify(fields: &mut [FieldSpec]) {
    let groups: BTreeSet<String> = fields.iter().filter_map(|f| f.group.clone()).collect();
    let mut names: BTreeSet<String> = BTreeSet::new();
    let mut ids: BTreeSet<String> = BTreeSet::new();
    for field in fields.iter_mut() {
        let clashes = |n: &str, names: &BTreeSet<String>| {
            names.contains(n) || (groups.contains(n) && field.group.as_deref() != Some(n))
        };
        if clashes(&field.name, &names) {
            field.name = next_free(&field.name, |c| clashes(c, &names));
        }
        names.insert(field.name.clone());
        if let Some(id) = &field.id {
            if ids.contains(id) {
                let fresh = next_free(id, |c| ids.contains(c));
                field.id = Some(fresh);
            }
            ids.insert(field.id.clone().unwrap());
        }
    }
}

fn next_free(base: &str, taken: impl Fn(&str) -> bool) -> String {
    let mut k = 2usize;
    loop {
        let candidate = format!("{base}_{k}");
        if !taken(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldKind, FieldSpec};

    fn tiny_pool() -> FieldPool {
        let mut v = Vec::new();
        for i in 0..10 {
            let name = if i % 3 == 0 { "email" } else { "q" };
            v.push(
                FieldSpec::new(FieldKind::Text, name)
                    .with_id(name)
                    .with_placeholder(&format!("p{i}")),
            );
        }
        FieldPool::from_entries(v, Provenance::File).unwrap()
    }

    #[test]
    fn builtin_pool_has_500_unique_entries() {
        let pool = FieldPool::builtin();
        assert_eq!(pool.len(), 500);
        assert_eq!(builtin::entries().len(), 500, "no builtin entry is a duplicate");
    }

    #[test]
    fn canonical_key_ignores_attribute_order() {
        let a: FieldSpec = serde_json::from_str(r#"{"kind":"text","name":"q","required":true,"id":"q"}"#).unwrap();
        let b: FieldSpec = serde_json::from_str(r#"{"id":"q","required":true,"name":"q","kind":"text"}"#).unwrap();
        assert_eq!(canonicalize(&a), canonicalize(&b));
        let c = FieldSpec { name: "mail".into(), ..a.clone() };
        let d = FieldSpec { name: "email".into(), ..a };
        assert_ne!(canonicalize(&c), canonicalize(&d));
    }

    #[test]
    fn duplicates_are_dropped_in_order() {
        let a = FieldSpec::new(FieldKind::Text, "a");
        let b = FieldSpec::new(FieldKind::Email, "b");
        let pool = FieldPool::from_entries(vec![a.clone(), b.clone(), a.clone()], Provenance::File).unwrap();
        assert_eq!(pool.entries(), &[a, b]);
    }

    #[test]
    fn parse_reports_bad_record() {
        let text = r#"[{"kind":"text","name":"a"},{"kind":"select","name":"s"}]"#;
        match FieldPool::parse(text, Provenance::File) {
            Err(PoolError::Invalid { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        match FieldPool::parse(r#"[{"kind":"text"}]"#, Provenance::File) {
            Err(PoolError::Record { index, message }) => {
                assert_eq!(index, 0);
                assert!(message.contains("name"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            FieldPool::parse("[{", Provenance::File),
            Err(PoolError::Syntax { line: 1, .. })
        ));
        assert!(FieldPool::parse("  \n", Provenance::File).unwrap().is_empty());
    }

    #[test]
    fn dump_then_parse_is_identity() {
        let pool = FieldPool::builtin();
        let again = FieldPool::parse(&pool.dump(), Provenance::Builtin).unwrap();
        assert_eq!(pool, again);
        assert_eq!(pool.dump(), again.dump());
    }

    #[test]
    fn sampling_is_deterministic_and_sized() {
        let pool = FieldPool::builtin();
        let a = sample_fields(&pool, CountRange::new(3, 3), 9).unwrap();
        let b = sample_fields(&pool, CountRange::new(3, 3), 9).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_errors() {
        let pool = tiny_pool();
        assert_eq!(
            sample_fields(&pool, CountRange::new(0, 2), 1),
            Err(SampleError::InvalidRange { min: 0, max: 2 })
        );
        assert_eq!(
            sample_fields(&pool, CountRange::new(4, 3), 1),
            Err(SampleError::InvalidRange { min: 4, max: 3 })
        );
        assert_eq!(
            sample_fields(&pool, CountRange::new(1, 11), 1),
            Err(SampleError::PoolTooSmall { available: 10, requested: 11 })
        );
        let empty = FieldPool::parse("", Provenance::File).unwrap();
        assert!(sample_fields(&empty, CountRange::new(1, 1), 1).is_err());
    }

    #[test]
    fn colliding_names_get_suffix() {
        let pool = tiny_pool();
        let all = sample_fields(&pool, CountRange::new(10, 10), 3).unwrap();
        let names: Vec<&str> = all.iter().map(|f| f.name.as_str()).collect();
        let emails: Vec<&&str> = names.iter().filter(|n| n.starts_with("email")).collect();
        assert_eq!(emails.len(), 4);
        assert!(names.contains(&"email") && names.contains(&"email_2"));
        assert!(names.contains(&"email_3") && names.contains(&"email_4"));
    }

    /// Exhaustive seed sweep over a 10-entry pool with colliding names.
    #[test]
    fn seed_sweep_never_yields_duplicate_names_or_ids() {
        let pool = tiny_pool();
        for seed in 0..2000u64 {
            for (min, max) in [(1, 10), (2, 5), (10, 10)] {
                let s = sample_fields(&pool, CountRange::new(min, max), seed).unwrap();
                assert!(s.len() >= min && s.len() <= max);
                let names: BTreeSet<&str> = s.iter().map(|f| f.name.as_str()).collect();
                assert_eq!(names.len(), s.len(), "seed {seed}");
                let ids: BTreeSet<&str> = s.iter().filter_map(|f| f.id.as_deref()).collect();
                assert_eq!(ids.len(), s.iter().filter(|f| f.id.is_some()).count());
            }
        }
    }

    #[test]
    fn admission_rule_skips_rejected_entries() {
        let pool = FieldPool::builtin();
        let s = sample_fields_with(&pool, CountRange::new(8, 8), 5, |f, _| f.kind != FieldKind::Text).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|f| f.kind != FieldKind::Text));
    }
}
