//! Recording backend replies in the file cache and replaying them offline.

use std::sync::Arc;

use abductive_vqa::backends::{
    BackendError, CachePolicy, Cached, FileCache, ScriptedTextGen, TextGenRequest, TextGenerator,
};

fn main() -> Result<(), BackendError> {
    let dir = tempfile::tempdir().map_err(|e| BackendError::Storage(e.to_string()))?;
    let cache = Arc::new(FileCache::open(dir.path())?);
    let scripted = ScriptedTextGen::new("demo").with("Name a color.", "- red");

    let recording = Cached::new(&scripted, cache.clone(), CachePolicy::ReadWrite);
    let req = TextGenRequest::new("Name a color.");
    println!("first call:  {:?}", recording.generate_text(&req)?.text);
    println!("second call: {:?}", recording.generate_text(&req)?.text);
    println!("(hits, misses) = {:?}", recording.counters());
    println!("cache: {:?}", cache.stats()?);

    let replay = Cached::new(&scripted, cache, CachePolicy::ReplayOnly);
    println!("replayed: {:?}", replay.generate_text(&req)?.text);
    match replay.generate_text(&TextGenRequest::new("Name a shape.")) {
        Err(e @ BackendError::CacheMiss(_)) => println!("unrecorded request: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
