//! Synthetic CVE-style corpus generator for tests and demos.
//!
//! Fabricates small before/after pairs in the layout the ingester expects.
//! Every file is clearly marked synthetic in its first line, pairs rotate
//! through C / Python / JavaScript so language stratification has something
//! to stratify, and identifiers embed the pair index so distinct pairs
//! never trip the near-duplicate filter. Fully deterministic for a given
//! (pairs, seed).

use std::path::Path;

use crate::corpus::META_FILE;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy)]
enum Flavor {
    C,
    Python,
    JavaScript,
}

impl Flavor {
    fn pick(i: usize) -> Flavor {
        match i % 3 {
            0 => Flavor::C,
            1 => Flavor::Python,
            _ => Flavor::JavaScript,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Flavor::C => "c",
            Flavor::Python => "py",
            Flavor::JavaScript => "js",
        }
    }
}

fn c_pair(i: usize, cap: u64, hdr: u64, err: u64) -> (String, String) {
    let header = format!("// synthetic sample for harness testing (pair {i})\n");
    let body_top = format!(
        "int handle_frame_{i}(const unsigned char *buf_{i}, size_t len_{i}) {{\n\
         \x20   unsigned int n_{i};\n\
         \x20   char out_{i}[{cap}];\n\
         \x20   if (len_{i} < {hdr}) {{\n\
         \x20       return -{err};\n\
         \x20   }}\n\
         \x20   n_{i} = ((unsigned int)buf_{i}[0] << 8) | buf_{i}[1];\n"
    );
    let guard = format!(
        "\x20   if (n_{i} > len_{i} - {hdr} || n_{i} > sizeof(out_{i})) {{\n\
         \x20       return -{err2};\n\
         \x20   }}\n",
        err2 = err + 1
    );
    let body_bottom = format!(
        "\x20   memcpy(out_{i}, buf_{i} + {hdr}, n_{i});\n\
         \x20   emit_frame_{i}(out_{i}, n_{i});\n\
         \x20   return 0;\n\
         }}\n"
    );
    let before = format!("{header}{body_top}{body_bottom}");
    let after = format!("{header}{body_top}{guard}{body_bottom}");
    (before, after)
}

fn python_pair(i: usize, cap: u64, hdr: u64, err: u64) -> (String, String) {
    let header = format!("# synthetic sample for harness testing (pair {i})\n");
    let body_top = format!(
        "def handle_frame_{i}(buf_{i}):\n\
         \x20   cap_{i} = {cap}\n\
         \x20   if len(buf_{i}) < {hdr}:\n\
         \x20       return -{err}\n\
         \x20   n_{i} = (buf_{i}[0] << 8) | buf_{i}[1]\n"
    );
    let guard = format!(
        "\x20   if n_{i} > len(buf_{i}) - {hdr} or n_{i} > cap_{i}:\n\
         \x20       return -{err2}\n",
        err2 = err + 1
    );
    let body_bottom = format!(
        "\x20   out_{i} = bytearray(cap_{i})\n\
         \x20   for k_{i} in range(n_{i}):\n\
         \x20       out_{i}[k_{i}] = buf_{i}[{hdr} + k_{i}]\n\
         \x20   emit_frame_{i}(bytes(out_{i}), n_{i})\n\
         \x20   return 0\n"
    );
    let before = format!("{header}{body_top}{body_bottom}");
    let after = format!("{header}{body_top}{guard}{body_bottom}");
    (before, after)
}

fn javascript_pair(i: usize, cap: u64, hdr: u64, err: u64) -> (String, String) {
    let header = format!("// synthetic sample for harness testing (pair {i})\n");
    let body_top = format!(
        "function handleFrame{i}(buf{i}) {{\n\
         \x20 const cap{i} = {cap};\n\
         \x20 const out{i} = new Uint8Array(cap{i});\n\
         \x20 if (buf{i}.length < {hdr}) {{\n\
         \x20   return -{err};\n\
         \x20 }}\n\
         \x20 const n{i} = (buf{i}[0] << 8) | buf{i}[1];\n"
    );
    let guard = format!(
        "\x20 if (n{i} > buf{i}.length - {hdr} || n{i} > cap{i}) {{\n\
         \x20   return -{err2};\n\
         \x20 }}\n",
        err2 = err + 1
    );
    let body_bottom = format!(
        "\x20 for (let k{i} = 0; k{i} < n{i}; k{i} += 1) {{\n\
         \x20   out{i}[k{i}] = buf{i}[{hdr} + k{i}];\n\
         \x20 }}\n\
         \x20 emitFrame{i}(out{i}, n{i});\n\
         \x20 return 0;\n\
         }}\n"
    );
    let before = format!("{header}{body_top}{body_bottom}");
    let after = format!("{header}{body_top}{guard}{body_bottom}");
    (before, after)
}

/// Generate `pairs` before/after pairs under `dir` (created if missing).
/// Returns the number of data files written (2 × pairs).
pub fn generate(dir: &Path, pairs: usize, seed: u64) -> Result<usize> {
    let mut rng = SplitMix64::new(seed);
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    for i in 0..pairs {
        let cap = 64 + rng.below(8) * 32;
        let hdr = 2 + rng.below(3);
        let err = 1 + rng.below(9);
        let flavor = Flavor::pick(i);
        let (before, after) = match flavor {
            Flavor::C => c_pair(i, cap, hdr, err),
            Flavor::Python => python_pair(i, cap, hdr, err),
            Flavor::JavaScript => javascript_pair(i, cap, hdr, err),
        };

        let year = 2015 + (i as u64 % 10) as u32;
        let cve_id = format!("SYNTH-{year}-{:04}", 1000 + i);
        let original = format!("frame_{i}.{}", flavor.extension());
        let stem = format!("pair_{i}");

        let folder = dir.join(&cve_id);
        std::fs::create_dir_all(&folder).map_err(|e| Error::io(&folder, e))?;
        let meta = serde_json::json!({
            "cve_id": cve_id,
            "year": year,
            "files": { &stem: original },
        });
        let meta_path = folder.join(META_FILE);
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap())
            .map_err(|e| Error::io(&meta_path, e))?;
        let before_path = folder.join(format!("{stem}.before"));
        std::fs::write(&before_path, before).map_err(|e| Error::io(&before_path, e))?;
        let after_path = folder.join(format!("{stem}.after"));
        std::fs::write(&after_path, after).map_err(|e| Error::io(&after_path, e))?;
    }
    Ok(pairs * 2)
}
