//! Regenerates the JSON configs under `fixtures/`.
//!
//!   cargo run -p sobolev-symm --example gen_fixtures

use std::path::Path;

use sobolev_symm::config::Config;
use sobolev_symm::fixtures::spd_polynomial_texts;

pub const SPD_RHO2_SEED: u64 = 0x5EED;
pub const SPD_RHO3_SEEDS: [u64; 3] = [0x5EED, 0x5EED + 1, 0x5EED + 2];

fn texts(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

fn write(dir: &Path, name: &str, cfg: &Config) {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json() + "\n").expect("write fixture");
    println!("wrote {}", path.display());
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).expect("fixtures dir");
    let iv = (-1.0, 1.0);

    write(&dir, "example1.json", &Config::new(iv, texts(&[&["1", "0"], &["0", "z^2+1"]])));
    write(&dir, "identity_rho1.json", &Config::new(iv, texts(&[&["1", "0"], &["0", "1"]])));
    let id2 = texts(&[&["1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]]);
    write(&dir, "identity_rho2.json", &Config::new(iv, id2.clone()));
    write(&dir, "spd_rho2.json", &Config::new(iv, spd_polynomial_texts(2, 3, SPD_RHO2_SEED)));
    for (k, seed) in SPD_RHO3_SEEDS.iter().enumerate() {
        let mut cfg = Config::new(iv, spd_polynomial_texts(3, 2, *seed));
        cfg.grid_points = 101;
        write(&dir, &format!("spd_rho3_{k}.json"), &cfg);
    }
    write(&dir, "diag_1_z.json", &Config::new(iv, texts(&[&["1", "0"], &["0", "z"]])));
    write(&dir, "bad_parse.json", &Config::new(iv, texts(&[&["1", "0"], &["0", "z+"]])));
    write(&dir, "near_singular.json", &Config::new(iv, texts(&[&["1", "0"], &["0", "1e-14"]])));
    let mut broken = Config::new(iv, id2);
    broken.free_row = Some(vec!["0".into(), "0".into(), "0".into()]);
    write(&dir, "broken_free_row.json", &broken);
}
