//! Text canonicalization and the fingerprints used as cache keys.

use abductive_vqa::domain::{canonical_json, canonicalize, fingerprint};
use serde_json::json;

fn main() {
    for raw in ["  Is it RAINING?  ", "The dog.", "a\tb   c!!"] {
        let c = canonicalize(raw);
        println!("{:?} -> {:?}", c.raw, c.canonical);
    }

    // key order does not change the canonical form, so both print the same digest
    let a = json!({"op": "nli", "request": {"premise": "p", "hypothesis": "h"}});
    let b = json!({"request": {"hypothesis": "h", "premise": "p"}, "op": "nli"});
    for v in [a, b] {
        let bytes = canonical_json(&v).unwrap();
        println!("{} {}", String::from_utf8_lossy(&bytes), fingerprint(&bytes));
    }
}
