//! Render every strategy × protocol combination for one code snippet.
//!
//! ```bash
//! cargo run -p promptaudit --example render_prompts
//! ```

use promptaudit::corpus::{CodeSample, Label, Origin};
use promptaudit::prompt::{Protocol, Strategy, TemplateSet};

fn main() {
    let sample = CodeSample {
        sample_id: "DEMO-2024-0001/before_fix/copy.c".into(),
        cve_id: "DEMO-2024-0001".into(),
        year: 2024,
        language: "C".into(),
        code: "void copy(char *dst, const char *src, unsigned n) {\n    memcpy(dst, src, n);\n}"
            .into(),
        label: Label::Vulnerable,
        origin: Origin::BeforeFix,
    };

    let templates = TemplateSet::builtin();
    for strategy in Strategy::ALL {
        for protocol in Protocol::ALL {
            let rendered = templates.render(&sample, strategy, protocol);
            println!("================ {strategy} / {protocol} ================");
            println!("{}", rendered.text);
        }
    }
    println!(
        "note: self_consistency shares the adaptive_cot body and differs only in sampling count"
    );
}
