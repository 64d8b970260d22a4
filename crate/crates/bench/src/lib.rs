//! Synthetic corpora for the benchmarks in `benches/`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// COREF SGML over `mentions` one-word mentions in paragraphs of 40 words.
/// Each mention links to a random earlier mention with probability 0.7.
/// `perturb` re-draws that fraction of the links, giving a second
/// annotation of the same text.
pub fn synthetic_sgml(mentions: usize, seed: u64, perturb: f64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let refs: Vec<Option<usize>> = (0..mentions)
        .map(|i| (i > 0 && rng.gen_bool(0.7)).then(|| rng.gen_range(0..i)))
        .collect();
    let mut noise = StdRng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut out = String::from("<DOC>\n<DOCNO> SYN </DOCNO>\n<HL>Synthetic headline</HL>\n<TEXT>\n<p>\n");
    for (i, r) in refs.iter().enumerate() {
        if i > 0 && i % 40 == 0 {
            out.push_str("\n</p>\n<p>\n");
        }
        let r = if i > 0 && noise.gen_bool(perturb) {
            noise.gen_bool(0.7).then(|| noise.gen_range(0..i))
        } else {
            *r
        };
        match r {
            Some(t) => out.push_str(&format!("<COREF ID=\"{i}\" REF=\"{t}\">w{i}</COREF> and ")),
            None => out.push_str(&format!("<COREF ID=\"{i}\">w{i}</COREF> and ")),
        }
    }
    out.push_str("\n</p>\n</TEXT>\n</DOC>\n");
    out
}
