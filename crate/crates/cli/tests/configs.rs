use std::fs;
use std::path::Path;

use rmb_cli::{parse_config, Command};

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = Vec::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let text = fs::read_to_string(&path).unwrap();
            let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen.push(cfg.command);
        }
    }
    for c in Command::ALL {
        assert!(seen.contains(&c), "no sample config for {}", c.as_str());
    }
}
