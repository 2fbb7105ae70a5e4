//! Streaming memory stays proportional to the template count, not the
//! line count. Lives in its own binary because it swaps the global allocator.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use logdag::config::RunConfig;
use logdag::pipeline::StreamParser;
use logdag::synth::{Corpus, CorpusSpec};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

/// Peak bytes allocated above the starting level while streaming `n` lines.
fn peak_for(n: usize) -> usize {
    let mut corpus = Corpus::new(&CorpusSpec::default());
    let config = RunConfig::default();
    let base = LIVE.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let mut parser = StreamParser::new(&config, false);
    for _ in 0..n {
        let (line, _) = corpus.line();
        parser.feed(&line);
    }
    assert_eq!(parser.lines_parsed(), n as u64);
    let peak = PEAK.load(Ordering::Relaxed) - base;
    drop(parser);
    peak
}

#[test]
fn streaming_memory_is_flat_in_line_count() {
    peak_for(1_000); // warm lazily initialised statics
    let small = peak_for(10_000);
    let large = peak_for(100_000);
    assert!(
        (large as f64) <= 1.25 * small as f64,
        "peak grew from {small} to {large} bytes for 10x the lines"
    );
}
