#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::mpsc;
use std::time::Duration;

pub const BIN: &str = env!("CARGO_BIN_EXE_honeyotp");
pub const SECRET: &str = "hc-shared-secret";
pub const ADMIN: &str = "admin-token";
pub const PASSWORD: &str = "violet-harbor-42";

pub fn honeyotp(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("HONEYOTP_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("run honeyotp")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A long-running `honeyotp` subprocess, killed on drop.
pub struct Proc {
    pub child: Child,
    pub addr: SocketAddr,
}

impl Proc {
    /// Starts `honeyotp <args>` and waits for its `listening on` line.
    pub fn start(args: &[&str], envs: &[(&str, String)]) -> Proc {
        let mut cmd = Command::new(BIN);
        cmd.args(args)
            .env_remove("HONEYOTP_CONFIG")
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        for (k, v) in envs {
            cmd.env(k, v);
        }
        let mut child = cmd.spawn().expect("spawn honeyotp");
        let out = child.stdout.take().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(out).lines().map_while(Result::ok) {
                if let Some(addr) = line.strip_prefix("listening on ") {
                    let _ = tx.send(addr.parse::<SocketAddr>().unwrap());
                }
            }
        });
        match rx.recv_timeout(Duration::from_secs(20)) {
            Ok(addr) => Proc { child, addr },
            Err(_) => {
                let _ = child.kill();
                panic!("honeyotp {args:?} did not start");
            }
        }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn interrupt(&mut self) -> std::process::ExitStatus {
        Command::new("kill")
            .args(["-INT", &self.child.id().to_string()])
            .status()
            .unwrap();
        for _ in 0..100 {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status;
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        panic!("process did not exit on interrupt");
    }
}

impl Drop for Proc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Config for a server and honeychecker pair in `dir`. The file gateway
/// writes SMS messages to `dir/outbox.jsonl`.
pub fn write_config(dir: &Path, honeychecker_url: &str) -> PathBuf {
    let path = dir.join("honeyotp.toml");
    let text = format!(
        r#"
[server]
listen = "127.0.0.1:0"
store = "{store}"
qr_scale = 2

[honeychecker]
url = "{honeychecker_url}"
secret = "{SECRET}"
listen = "127.0.0.1:0"
store = "{hc_store}"
timeout_ms = 1000

[sms]
gateway = "file"
outbox = "{outbox}"

[rate_limit]
enabled = false

[accounts]
admin_token = "{ADMIN}"

[accounts.hash]
memory_kib = 8
iterations = 1
parallelism = 1
"#,
        store = dir.join("accounts.json").display(),
        hc_store = dir.join("honeychecker.jsonl").display(),
        outbox = dir.join("outbox.jsonl").display(),
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn outbox_codes(dir: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("outbox.jsonl")).unwrap_or_default();
    text.lines()
        .map(|line| {
            let msg: honeyotp_core::SmsMessage = serde_json::from_str(line).unwrap();
            msg.codes()
        })
        .collect()
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into()
}

pub fn post(url: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
    let mut resp = agent().post(url).send_json(body).unwrap();
    let status = resp.status().as_u16();
    let value = resp
        .body_mut()
        .read_json()
        .unwrap_or(serde_json::Value::Null);
    (status, value)
}

pub fn get(url: &str) -> (u16, serde_json::Value) {
    let mut resp = agent().get(url).call().unwrap();
    let status = resp.status().as_u16();
    let value = resp
        .body_mut()
        .read_json()
        .unwrap_or(serde_json::Value::Null);
    (status, value)
}

pub fn registration(username: &str, position: u32) -> serde_json::Value {
    serde_json::json!({
        "username": username,
        "password": PASSWORD,
        "firstname": "Alice",
        "lastname": "A",
        "phone": "+306912345678",
        "position": position,
    })
}

/// Reads an SVG written by `honeyotp qr` back into a module grid and
/// decodes it.
pub fn decode_svg(svg: &str) -> String {
    let side: usize = svg
        .split("viewBox=\"0 0 ")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let path = svg
        .split(" d=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    let mut dark = vec![false; side * side];
    for cmd in path.split('M').filter(|s| !s.is_empty()) {
        let xy = cmd.split('h').next().unwrap();
        let mut it = xy.split(' ');
        let x: usize = it.next().unwrap().parse().unwrap();
        let y: usize = it.next().unwrap().parse().unwrap();
        dark[y * side + x] = true;
    }
    let grid = rqrr::SimpleGrid::from_func(side - 8, |x, y| dark[(y + 4) * side + (x + 4)]);
    rqrr::Grid::new(grid).decode().unwrap().1
}

pub fn decode_png(bytes: &[u8]) -> String {
    let img = image::load_from_memory(bytes).unwrap().to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.into_raw();
    let mut prepared = rqrr::PreparedImage::prepare_from_greyscale(w, h, |x, y| raw[y * w + x]);
    let grids = prepared.detect_grids();
    assert_eq!(grids.len(), 1);
    grids[0].decode().unwrap().1
}
