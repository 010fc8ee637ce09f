#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn model(name: &str) -> String {
    data_dir().join("models").join(name).display().to_string()
}

/// One corpus line from a 2017 English post by a year-old account.
pub fn line(id: &str, text: &str) -> String {
    json!({
        "id": id,
        "text": text,
        "lang": "en",
        "created_at": "2017-03-01T10:00:00Z",
        "author_created_at": "2016-03-01T10:00:00Z",
        "retweet_flag": false,
    })
    .to_string()
}

pub fn spam_line(id: &str) -> String {
    line(id, "cheap deals every day #win #free #deal #promo #sale")
}

/// A scratch campaign: lexicon and dictionary copied from `data/`, state
/// under `state/` and reports under `state/reports/`.
pub struct Campaign {
    pub dir: TempDir,
    pub config: PathBuf,
}

impl Campaign {
    /// `body` is appended after the data_dir and corpus settings.
    pub fn new(corpus: &str, body: &str) -> Self {
        let dir = TempDir::new().unwrap();
        for f in ["lexicon.tsv", "negations.txt", "offensive.txt"] {
            fs::copy(data_dir().join(f), dir.path().join(f)).unwrap();
        }
        fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
        let config = dir.path().join("campaign.toml");
        let head = "data_dir = \"state\"\n\n[corpus]\npath = \"corpus.jsonl\"\nlexicon = \"lexicon.tsv\"\n\
                    negations = \"negations.txt\"\ndictionaries = [\"offensive.txt\"]\n\n";
        fs::write(&config, format!("{head}{body}")).unwrap();
        Campaign { dir, config }
    }

    /// The bundled demo campaign, relocated to a scratch directory.
    pub fn demo() -> Self {
        let shipped = fs::read_to_string(data_dir().join("campaign.toml")).unwrap();
        let (_, rest) = shipped.split_once("[filter]").unwrap();
        Self::new(
            &fs::read_to_string(data_dir().join("corpus.jsonl")).unwrap(),
            &format!("[filter]{rest}"),
        )
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.path("state/reports").join(name)
    }

    pub fn read_report(&self, name: &str) -> String {
        fs::read_to_string(self.report(name)).unwrap()
    }

    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_crowdlabel"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .unwrap()
    }

    /// Runs a command that must succeed and returns its stdout.
    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed with {:?}\nstdout: {}\nstderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// Runs a command that must fail with `code` and returns its stderr.
    pub fn fails(&self, args: &[&str], code: i32) -> String {
        let out = self.run(args);
        assert_eq!(
            out.status.code(),
            Some(code),
            "{args:?}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stderr).unwrap()
    }
}

/// `(key, value)` rows of two named CSV columns.
pub fn pairs(csv_text: &str, key: &str, value: &str) -> Vec<(String, String)> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = r.headers().unwrap().clone();
    let at = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (k, v) = (at(key), at(value));
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[k].to_string(), rec[v].to_string())
        })
        .collect()
}
