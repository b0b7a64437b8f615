#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;

use rthkp_core::Store;
use rthkp_server::auth::AdminCredential;
use rthkp_server::{router, ApiConfig};
use tempfile::TempDir;

pub const TOKEN: &str = "test-admin-token-0123456789";

pub struct Server {
    pub addr: SocketAddr,
    pub store: Arc<Store>,
    pub dir: TempDir,
    pub client: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for Server {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub struct Options {
    pub admin: bool,
    pub seeded: bool,
    pub static_files: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            admin: true,
            seeded: true,
            static_files: false,
        }
    }
}

pub async fn start(opts: Options) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open_dir(dir.path()).unwrap());
    if opts.seeded {
        store.seed_default(false).unwrap();
    }
    let mut config = ApiConfig {
        admin: opts.admin.then(|| AdminCredential::new(TOKEN).unwrap()),
        ..ApiConfig::default()
    };
    if opts.static_files {
        let www = dir.path().join("www");
        let photos = dir.path().join("photos");
        std::fs::create_dir_all(www.join("assets")).unwrap();
        std::fs::create_dir_all(&photos).unwrap();
        std::fs::write(
            www.join("index.html"),
            "<!doctype html><title>rthkp</title>",
        )
        .unwrap();
        std::fs::write(www.join("assets/app.js"), "console.log(1)").unwrap();
        std::fs::write(photos.join("kambang.jpg"), [0xff, 0xd8, 0xff]).unwrap();
        config.static_dir = Some(www);
        config.photos_dir = Some(photos);
    }
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(store.clone(), config);
    let task = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Server {
        addr,
        store,
        dir,
        client: reqwest::Client::new(),
        task,
    }
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn data_path(&self) -> PathBuf {
        self.dir.path().to_path_buf()
    }

    pub async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(self.url(path)).send().await.unwrap()
    }

    pub async fn get_json(&self, path: &str) -> (u16, serde_json::Value) {
        let r = self.get(path).await;
        let status = r.status().as_u16();
        (status, r.json().await.unwrap())
    }

    pub fn admin(&self, method: reqwest::Method, path: &str) -> reqwest::RequestBuilder {
        self.client
            .request(method, self.url(path))
            .bearer_auth(TOKEN)
    }
}

pub fn feature_body(name: &str, category: &str, lon: f64, lat: f64) -> serde_json::Value {
    serde_json::json!({
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [lon, lat]},
        "properties": {"name": name, "category": category}
    })
}

/// Sends `raw_path` byte-for-byte, bypassing client URL normalization.
/// Blocking; call from `spawn_blocking`.
pub fn raw_get(addr: SocketAddr, raw_path: &str) -> u16 {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "GET {raw_path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    resp.split_whitespace().nth(1).unwrap().parse().unwrap()
}
