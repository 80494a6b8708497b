#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn sa2net(args: &[&str]) -> Output {
    sa2net_env(args, &[])
}

pub fn sa2net_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sa2net"));
    cmd.args(args).env_remove("SA2NET_DTYPE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub const SMALL_SPEC: &str = "height = 32\nwidth = 32\ncells = 1,3\nradius = 3,6\nseed = 4\n";

/// A narrow 32×32 model that trains in well under a second per step.
pub fn small_config(channels: usize, steps: usize) -> String {
    format!(
        "channels = {channels}\nheight = 32\nwidth = 32\nlsa.groups = 4\nlsa.kernel_sizes = 1,3,5,7\n\
         encoder.widths = 4,6,8,8\nseed = 1\nsteps = {steps}\nbatch_size = 2\ndata_seed = 3\n"
    )
}

/// Writes a spec, generates `count` samples into `dir/data` and returns that directory.
pub fn synth_small(dir: &Path, count: u64) -> std::path::PathBuf {
    let spec = dir.join("spec.txt");
    std::fs::write(&spec, SMALL_SPEC).unwrap();
    let data = dir.join("data");
    let out = sa2net(&["synth", "--spec", path(&spec), "--out", path(&data), "--count", &count.to_string()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    data
}

pub fn train_small(dir: &Path, data: &Path, name: &str, channels: usize, steps: usize) -> std::path::PathBuf {
    let cfg = dir.join(format!("{name}.cfg"));
    std::fs::write(&cfg, small_config(channels, steps)).unwrap();
    let ckpt = dir.join(format!("{name}.sa2c"));
    let out = sa2net(&["train", "--config", path(&cfg), "--data", path(data), "--out", path(&ckpt)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    ckpt
}
