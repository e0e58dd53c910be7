use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raf_core::oracle::{
    Gallery, IdentifyRequest, LocalOracle, Oracle, OracleError, RemoteOracle, WireError, TOKEN_HEADER,
};
use raf_core::synthetic::posed_face;
use raf_core::warp::Image;
use raf_harness::server::serve_oracle;

fn gallery() -> Arc<Gallery> {
    let g = Gallery::new(0.8)
        .unwrap()
        .enroll("ada", &[posed_face(1, 64).image])
        .unwrap()
        .enroll("bela", &[posed_face(2, 64).image])
        .unwrap();
    Arc::new(g)
}

fn post(url: &str, body: &'static [u8], token: Option<&str>) -> (u16, String) {
    let client = reqwest::blocking::Client::new();
    let mut req = client.post(format!("{url}/identify")).body(body);
    if let Some(t) = token {
        req = req.header(TOKEN_HEADER, t);
    }
    let resp = req.send().unwrap();
    (resp.status().as_u16(), resp.text().unwrap())
}

#[test]
fn enrolled_face_is_identified() {
    let server = serve_oracle(gallery(), "127.0.0.1:0", None).unwrap();
    let probe = Image::from_u8(64, 64, 3, &posed_face(2, 64).image.to_u8()).unwrap();
    let mut remote = RemoteOracle::new(&server.url(), None).unwrap();
    let mut local = LocalOracle::new(gallery());
    let got = remote.query(&probe).unwrap();
    assert_eq!(got.identity.as_deref(), Some("bela"));
    assert_eq!(got, local.query(&probe).unwrap());
}

#[test]
fn garbage_bodies_are_rejected() {
    let server = serve_oracle(gallery(), "127.0.0.1:0", Some(1)).unwrap();
    for body in [&b"garbage"[..], br#"{"image_b64":"%%%"}"#, br#"{"image_b64":"aGVsbG8="}"#, b""] {
        let (status, text) = post(&server.url(), body, Some("t"));
        assert_eq!(status, 400, "{text}");
        serde_json::from_str::<WireError>(&text).unwrap();
    }
    // Rejected requests do not consume budget.
    let img = posed_face(1, 64).image;
    let mut remote = RemoteOracle::new(&server.url(), Some("t".into())).unwrap();
    assert!(remote.query(&img).is_ok());
}

#[test]
fn budgets_are_per_token() {
    let server = serve_oracle(gallery(), "127.0.0.1:0", Some(3)).unwrap();
    let img = posed_face(1, 64).image;
    let mut alice = RemoteOracle::new(&server.url(), Some("alice".into())).unwrap();
    for _ in 0..3 {
        alice.query(&img).unwrap();
    }
    assert_eq!(alice.query(&img), Err(OracleError::RemoteBudgetExhausted));
    let mut bob = RemoteOracle::new(&server.url(), Some("bob".into())).unwrap();
    assert!(bob.query(&img).is_ok());

    let body = serde_json::to_vec(&IdentifyRequest::from_image(&img).unwrap()).unwrap();
    let resp = reqwest::blocking::Client::new()
        .post(format!("{}/identify", server.url()))
        .header(TOKEN_HEADER, "alice")
        .body(body)
        .send()
        .unwrap();
    assert_eq!(resp.status().as_u16(), 429);
    let err: WireError = serde_json::from_str(&resp.text().unwrap()).unwrap();
    assert_eq!(err.error, "budget_exhausted");
}

#[test]
fn bind_failure_is_reported() {
    let first = serve_oracle(gallery(), "127.0.0.1:0", None).unwrap();
    let err = serve_oracle(gallery(), &first.addr().to_string(), None).err().unwrap();
    assert_eq!(err.exit_code(), 3);
    assert!(serve_oracle(gallery(), "not an address", None).is_err());
}

#[test]
fn concurrent_clients_get_consistent_answers() {
    let server = serve_oracle(gallery(), "127.0.0.1:0", None).unwrap();
    let url = server.url();
    let handles: Vec<_> = (0..4u64)
        .map(|i| {
            let url = url.clone();
            std::thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(i);
                let seed = rng.gen_range(1..=2);
                let img = posed_face(seed, 64).image;
                let mut remote = RemoteOracle::new(&url, None).unwrap();
                let got = remote.query(&img).unwrap();
                (got, LocalOracle::new(gallery()).query(&img).unwrap())
            })
        })
        .collect();
    for h in handles {
        let (remote, local) = h.join().unwrap();
        assert_eq!(remote.identity, local.identity);
    }
}
