use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering::Relaxed};

use refinery::corpus::open_warc;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, l: Layout) -> *mut u8 {
        let p = System.alloc(l);
        if !p.is_null() {
            let now = LIVE.fetch_add(l.size(), Relaxed) + l.size();
            PEAK.fetch_max(now, Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, p: *mut u8, l: Layout) {
        System.dealloc(p, l);
        LIVE.fetch_sub(l.size(), Relaxed);
    }
}

#[global_allocator]
static A: Counting = Counting;

fn warc_file(path: &std::path::Path, small: usize, huge: usize) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    let mut rec = |payload: &[u8]| {
        write!(f, "WARC/1.0\r\nWARC-Type: response\r\nContent-Length: {}\r\n\r\n", payload.len()).unwrap();
        f.write_all(payload).unwrap();
        f.write_all(b"\r\n\r\n").unwrap();
    };
    rec(&vec![b'x'; huge]);
    for i in 0..small {
        rec(format!("record {i} {}", "y".repeat(200)).as_bytes());
    }
}

/// Peak bytes allocated while streaming `path`, above the starting level.
fn peak_while_reading(path: &std::path::Path) -> (usize, u64) {
    let base = LIVE.load(Relaxed);
    PEAK.store(base, Relaxed);
    let mut n = 0;
    for r in open_warc(std::fs::File::open(path).unwrap()).unwrap() {
        r.unwrap();
        n += 1;
    }
    (PEAK.load(Relaxed) - base, n)
}

#[test]
fn peak_memory_is_independent_of_record_count() {
    let dir = tempfile::tempdir().unwrap();
    let huge = 4 << 20;
    let (few, many) = (dir.path().join("few.warc"), dir.path().join("many.warc"));
    warc_file(&few, 100, huge);
    warc_file(&many, 20_000, huge);
    let (peak_few, n_few) = peak_while_reading(&few);
    let (peak_many, n_many) = peak_while_reading(&many);
    assert_eq!((n_few, n_many), (101, 20_001));
    let file_size = std::fs::metadata(&many).unwrap().len() as usize;
    assert!(file_size > 2 * huge, "fixture must be dominated by small records");
    // bounded by a small multiple of the largest record, and not growing with N
    assert!(peak_many < 3 * huge, "peak {peak_many} for a {file_size}-byte file");
    assert!(peak_many <= peak_few + (256 << 10), "many: {peak_many}, few: {peak_few}");
}
