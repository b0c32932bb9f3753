//! Cache-recording wrapper shared by all three backend roles.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::cache::{CacheEntry, FileCache};
use super::{
    check_nli_inputs, BackendError, ClueGenRequest, ClueGenerator, EntailmentScorer, NliRequest, NliScores,
    TextGenRequest, TextGenResponse, TextGenerator,
};
use crate::domain::canonical_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CachePolicy {
    /// Serve hits from the cache, call the backend on a miss and record it.
    #[default]
    ReadWrite,
    /// Serve hits from the cache and fail on a miss. The wrapped backend is
    /// never called.
    ReplayOnly,
}

/// Wraps a backend so that every call is recorded in a [`FileCache`] before
/// it returns.
pub struct Cached<B> {
    inner: B,
    cache: Arc<FileCache>,
    policy: CachePolicy,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<B> Cached<B> {
    pub fn new(inner: B, cache: Arc<FileCache>, policy: CachePolicy) -> Self {
        Self { inner, cache, policy, hits: AtomicU64::new(0), misses: AtomicU64::new(0) }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    /// `(hits, misses)` observed by this wrapper so far.
    pub fn counters(&self) -> (u64, u64) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }

    fn through<Q, R>(
        &self,
        backend_id: &str,
        op: &str,
        request: &Q,
        call: impl FnOnce() -> Result<R, BackendError>,
    ) -> Result<R, BackendError>
    where
        Q: Serialize,
        R: Serialize + DeserializeOwned,
    {
        let encode = |e: serde_json::Error| BackendError::Storage(format!("cannot encode cache snapshot: {e}"));
        let snapshot = canonical_json(&serde_json::json!({
            "backend": backend_id,
            "op": op,
            "request": request,
        }))
        .map_err(encode)?;
        let snapshot = String::from_utf8(snapshot).expect("serde_json emits UTF-8");
        let key = crate::domain::fingerprint(snapshot.as_bytes());

        if let Some(entry) = self.cache.get(&key)? {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return serde_json::from_str(&entry.response_snapshot)
                .map_err(|e| BackendError::Storage(format!("cached response for {key} is unreadable: {e}")));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        if self.policy == CachePolicy::ReplayOnly {
            return Err(BackendError::CacheMiss(key));
        }
        let response = call()?;
        let response_snapshot = String::from_utf8(canonical_json(&response).map_err(encode)?).expect("UTF-8");
        self.cache.put(&CacheEntry::new(snapshot, response_snapshot))?;
        Ok(response)
    }
}

impl<B: TextGenerator> TextGenerator for Cached<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        self.through(self.inner.backend_id(), "text", req, || self.inner.generate_text(req))
    }
}

impl<B: ClueGenerator> ClueGenerator for Cached<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn generate_clues_raw(&self, req: &ClueGenRequest) -> Result<TextGenResponse, BackendError> {
        req.validate()?;
        self.through(self.inner.backend_id(), "clues", req, || self.inner.generate_clues_raw(req))
    }
}

impl<B: EntailmentScorer> EntailmentScorer for Cached<B> {
    fn backend_id(&self) -> &str {
        self.inner.backend_id()
    }

    fn nli_score(&self, premise: &str, hypothesis: &str) -> Result<NliScores, BackendError> {
        check_nli_inputs(premise, hypothesis)?;
        let req = NliRequest { premise: premise.to_owned(), hypothesis: hypothesis.to_owned() };
        self.through(self.inner.backend_id(), "nli", &req, || self.inner.nli_score(premise, hypothesis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::mock::{RuleNli, ScriptedTextGen};
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        calls: AtomicUsize,
    }

    impl TextGenerator for Counting {
        fn backend_id(&self) -> &str {
            "counting"
        }
        fn generate_text(&self, req: &TextGenRequest) -> Result<TextGenResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(TextGenResponse::completed(format!("{}#{n}", req.prompt)))
        }
    }

    fn cache() -> (tempfile::TempDir, Arc<FileCache>) {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(FileCache::open(dir.path()).unwrap());
        (dir, cache)
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let (_d, cache) = cache();
        let gen = Cached::new(Counting { calls: AtomicUsize::new(0) }, cache, CachePolicy::ReadWrite);
        let req = TextGenRequest::new("P");
        let first = gen.generate_text(&req).unwrap();
        let second = gen.generate_text(&req).unwrap();
        assert_eq!(first, second);
        assert_eq!(gen.inner().calls.load(Ordering::SeqCst), 1);
        assert_eq!(gen.counters(), (1, 1));
    }

    #[test]
    fn replay_only_miss_fails_without_calling_backend() {
        let (_d, cache) = cache();
        let gen = Cached::new(Counting { calls: AtomicUsize::new(0) }, cache.clone(), CachePolicy::ReplayOnly);
        let err = gen.generate_text(&TextGenRequest::new("unseen")).unwrap_err();
        assert!(matches!(err, BackendError::CacheMiss(_)));
        assert_eq!(gen.inner().calls.load(Ordering::SeqCst), 0);

        let rec = Cached::new(Counting { calls: AtomicUsize::new(0) }, cache.clone(), CachePolicy::ReadWrite);
        let recorded = rec.generate_text(&TextGenRequest::new("seen")).unwrap();
        assert_eq!(gen.generate_text(&TextGenRequest::new("seen")).unwrap(), recorded);
    }

    #[test]
    fn backend_id_is_part_of_the_key() {
        let (_d, cache) = cache();
        let a = Cached::new(ScriptedTextGen::new("a").with("P", "from a"), cache.clone(), CachePolicy::ReadWrite);
        let b = Cached::new(ScriptedTextGen::new("b").with("P", "from b"), cache.clone(), CachePolicy::ReadWrite);
        assert_eq!(a.generate_text(&TextGenRequest::new("P")).unwrap().text, "from a");
        assert_eq!(b.generate_text(&TextGenRequest::new("P")).unwrap().text, "from b");
        assert_eq!(cache.stats().unwrap().entries, 2);
    }

    #[test]
    fn nli_scores_are_cached() {
        let (_d, cache) = cache();
        let nli = Cached::new(RuleNli::new(), cache.clone(), CachePolicy::ReadWrite);
        let s = nli.nli_score("a man holds an umbrella", "a man").unwrap();
        let replay = Cached::new(RuleNli::new(), cache, CachePolicy::ReplayOnly);
        assert_eq!(replay.nli_score("a man holds an umbrella", "a man").unwrap(), s);
        assert!(nli.nli_score("", "x").is_err());
    }

    #[test]
    fn concurrent_writers_of_one_key_leave_an_intact_entry() {
        let (_d, cache) = cache();
        let snapshot = r#"{"backend":"x","op":"text","request":{}}"#.to_owned();
        std::thread::scope(|s| {
            for i in 0..16 {
                let cache = cache.clone();
                let snapshot = snapshot.clone();
                s.spawn(move || {
                    let body = format!("{{\"text\":\"{}\"}}", "y".repeat(1000 + i));
                    for _ in 0..20 {
                        cache.put(&CacheEntry::new(snapshot.clone(), body.clone())).unwrap();
                    }
                });
            }
        });
        let key = crate::domain::fingerprint(snapshot.as_bytes());
        let entry = cache.get(&key).unwrap().expect("entry survives");
        assert!(entry.is_consistent());
        let v: serde_json::Value = serde_json::from_str(&entry.response_snapshot).unwrap();
        let len = v["text"].as_str().unwrap().len();
        assert!((1000..1016).contains(&len));
        assert_eq!(cache.stats().unwrap().entries, 1);
    }
}
