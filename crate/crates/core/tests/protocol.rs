mod common;

use cogrip::protocol::Session;
use serde_json::Value;

#[test]
fn survives_10k_malformed_frames() {
    let msg = common::check_protocol_fuzz(10_000, 21).unwrap();
    println!("{msg}");
}

#[test]
fn batched_stepping_equals_one_by_one() {
    common::check_vectorized_equals_sequential(8, 80, 3).unwrap();
}

#[test]
fn observation_shape_matches_data() {
    let mut s = Session::new(common::test_store());
    s.handle_line(r#"{"op":"make","split":"test","follower":{"autonomy":"cautious","phi":0.9},"seed":1,"num_envs":1}"#);
    let v: Value = serde_json::from_str(&s.handle_line(r#"{"op":"reset","env_id":0}"#)).unwrap();
    assert_eq!(v["ok"], true, "{v}");
    let obs = &v["results"][0]["observation"];
    let n: u64 = obs["shape"].as_array().unwrap().iter().map(|d| d.as_u64().unwrap()).product();
    assert_eq!(obs["data"].as_array().unwrap().len() as u64, n);
}

#[test]
fn stepping_before_reset_is_an_error() {
    let mut s = Session::new(common::test_store());
    s.handle_line(r#"{"op":"make","split":"test","follower":{"autonomy":"eager","phi":0.9},"seed":1,"num_envs":2}"#);
    let v: Value = serde_json::from_str(&s.handle_line(r#"{"op":"step","env_id":0,"action_id":0}"#)).unwrap();
    assert_eq!(v["ok"], false);
}

#[test]
fn close_ends_the_session() {
    let mut s = Session::new(common::test_store());
    let v: Value = serde_json::from_str(&s.handle_line(r#"{"op":"close"}"#)).unwrap();
    assert_eq!(v["ok"], true);
    assert!(s.is_closed());
}
