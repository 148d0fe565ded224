#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn wae() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wae"));
    c.arg("--log-level").arg("warn");
    c
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn wae")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

/// Arguments of the golden mini-dump build.
pub fn golden_build(dump: &Path, out: &Path) -> Command {
    let mut c = wae();
    c.args(["--seed", "7", "build-corpus", "--dump"]).arg(dump).arg("--out").arg(out);
    c.args(["--inlink-min", "2", "--dev-entities", "1", "--n-ans", "3", "--n-unans", "3"]);
    c
}

pub struct Measured {
    pub success: bool,
    pub elapsed: Duration,
    /// Peak resident set of the child, in bytes.
    pub peak_rss: u64,
}

/// Runs the command and reports the child's own peak memory.
pub fn measure(cmd: &mut Command) -> Measured {
    let t0 = Instant::now();
    let child = cmd.stdout(Stdio::null()).stderr(Stdio::null()).spawn().expect("spawn wae");
    let pid = child.id() as libc::pid_t;
    let mut status = 0;
    // SAFETY: rusage is plain data; wait4 fills it for the child we spawned.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
    assert_eq!(rc, pid, "wait4 failed");
    let elapsed = t0.elapsed();
    std::mem::forget(child);
    let success = libc::WIFEXITED(status) && libc::WEXITSTATUS(status) == 0;
    // ru_maxrss is in kilobytes on Linux
    Measured { success, elapsed, peak_rss: usage.ru_maxrss as u64 * 1024 }
}

const WORDS: &[&str] = &[
    "river", "city", "league", "album", "station", "county", "village", "season", "band", "museum", "bridge", "valley",
    "festival", "railway", "castle", "harbour", "novel", "painter", "island", "school",
];

fn sentence(rng: &mut ChaCha8Rng, topics: usize, own: usize) -> String {
    let n = rng.random_range(6..16);
    let mut words: Vec<String> = (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string()).collect();
    if rng.random_bool(0.6) {
        let mut t = rng.random_range(0..topics);
        if t == own {
            t = (t + 1) % topics;
        }
        let k = rng.random_range(0..words.len());
        words[k] = if rng.random_bool(0.5) { format!("[[Topic {t}]]") } else { format!("[[Topic {t}|{}]]", words[k]) };
    } else if rng.random_bool(0.2) {
        words.push(format!("near Topic {}", rng.random_range(0..topics)));
    }
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

/// Writes an XML dump of `Topic k` pages: every topic once, then more pages
/// cycling through the titles with fresh ids until the dump holds at least
/// `bytes` bytes.
pub fn generate_dump(path: &Path, bytes: u64, topics: usize, seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = BufWriter::new(File::create(path).unwrap());
    let mut written = 0u64;
    let mut id = 0usize;
    w.write_all(b"<mediawiki>\n").unwrap();
    while id < topics || written < bytes {
        let own = id % topics;
        let n = rng.random_range(5..14);
        let body: Vec<String> = (0..n).map(|_| sentence(&mut rng, topics, own)).collect();
        let page = format!(
            "<page>\n<title>Topic {own}</title>\n<id>{}</id>\n<text>'''Topic {own}''' is a {} {}.</text>\n</page>\n",
            id + 1,
            WORDS[own % WORDS.len()],
            body.join(" ")
        );
        w.write_all(page.as_bytes()).unwrap();
        written += page.len() as u64;
        id += 1;
    }
    w.write_all(b"</mediawiki>\n").unwrap();
    w.flush().unwrap();
    written
}
