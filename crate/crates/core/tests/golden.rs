//! Byte-level regression against checked-in reports for the zero interaction.
//! Set `GIBBSLINE_BLESS=1` to rewrite the golden files after an intended change.

use std::path::PathBuf;
use std::process::Command;

const SUBCOMMANDS: [&str; 6] = ["spectrum", "measure", "converge", "mixing", "entropy", "check-bounds"];

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/zero")
}

#[test]
fn zero_interaction_reports_match_golden() {
    let out = tempfile::tempdir().unwrap();
    let bless = std::env::var_os("GIBBSLINE_BLESS").is_some();
    for sub in SUBCOMMANDS {
        let status = Command::new(env!("CARGO_BIN_EXE_gibbsline"))
            .args([sub, "--config"])
            .arg(golden_dir().join("run.toml"))
            .arg("--out")
            .arg(out.path())
            .args(["--format", "csv"])
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&status.stderr));
        let produced = std::fs::read(out.path().join(format!("{sub}.csv"))).unwrap();
        let golden = golden_dir().join(format!("{sub}.csv"));
        if bless {
            std::fs::write(&golden, &produced).unwrap();
            continue;
        }
        let expected = std::fs::read(&golden).unwrap_or_else(|e| panic!("{}: {e}", golden.display()));
        assert!(
            produced == expected,
            "{sub} differs from golden:\n{}",
            String::from_utf8_lossy(&produced)
        );
    }
}
