mod common;

use std::time::Duration;

use base64::Engine as _;
use common::{start, start_with, ticks};
use gmob_core::control::CommandKind;
use gmob_core::data::{encode_pgm, synth_gesture_image, DrParams, GestureClass, Quartile};
use gmob_core::sim::{run_mission, Classifier, FlightLoop, GestureOutcome, Mission, PipelineConfig, RowStatus};
use gmob_gcs::protocol::{ClockMode, StreamFrame};
use gmob_gcs::{Session, StreamOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn quiet() -> Value {
    json!({"noise": {"actuation_sigma": 0.0, "imu_v_sigma": 0.0, "imu_yaw_sigma": 0.0}})
}

#[tokio::test]
async fn create_validate_and_query() {
    let srv = start().await;
    let a = srv.create(json!({"v": 1})).await;
    let b = srv.create(json!({})).await;
    assert_ne!(a, b);
    let s = srv.state(&a).await;
    assert!(!s.airborne && s.idle);
    assert_eq!((s.tick, s.pending, s.log_rows), (0, 0, 0));
    assert_eq!(s.est.position, [0.0; 3]);
    assert!(s.truth.is_none());
    assert_eq!(s.grid.n, 4);

    let (st, v) = srv
        .post("/v1/sessions", json!({"v": 1, "config": {"model": {"dropout_p": 1.5}}}))
        .await;
    assert_eq!(st, 422);
    assert_eq!(v["error"]["field"], "model.dropout_p");
    assert!(v["error"]["message"].as_str().unwrap().contains("dropout_p"));
    let (st, v) = srv
        .post(
            "/v1/sessions",
            json!({"v": 1, "config_toml": "[model]\ndropout_p = 1.5\n"}),
        )
        .await;
    assert_eq!(st, 422);
    assert_eq!(v["error"]["field"], "model.dropout_p");
    let (st, v) = srv.post("/v1/sessions", json!({"v": 2})).await;
    assert_eq!(st, 400, "{v}");
    let (st, _) = srv.post("/v1/sessions", json!({"v": 1, "config": {"bogus": 1}})).await;
    assert_eq!(st, 400);

    let r = srv
        .http
        .get(format!("{}/v1/sessions/nope", srv.base))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 404);
    let (st, v) = srv
        .post(
            "/v1/sessions/nope/gestures",
            json!({"v": 1, "class_id": 1, "confidence": 0.9}),
        )
        .await;
    assert_eq!((st, v["error"]["code"].as_str()), (404, Some("not_found")));
}

#[tokio::test]
async fn gestures_gate_and_fly() {
    let srv = start().await;
    let id = srv.accelerated(1, json!({})).await;
    let low = srv.gesture(&id, 1, 0.4).await;
    assert_eq!(low["status"], "rejected");
    assert_eq!(low["reason"], "below-threshold");
    assert_eq!(srv.state(&id).await.tick, 0, "a gated gesture must not reach the loop");

    let ack = srv.gesture(&id, 1, 0.9).await;
    assert_eq!(ack["status"], "accepted");
    assert_eq!(ack["queue_position"], 1);
    let s = srv.wait_idle(&id).await;
    assert!(s.airborne);
    // TL at 0.9 is the fastest TL cell: step / (8 · v_unit) = 0.5 s = 10 ticks, plus 2 hold ticks
    assert_eq!(s.tick, 12);
    assert!((s.est.position[2] - 1.5).abs() < 0.3);

    let (st, v) = srv
        .post(
            &format!("/v1/sessions/{id}/gestures"),
            json!({"v": 1, "class_id": 42, "confidence": 0.9}),
        )
        .await;
    assert_eq!(st, 422);
    assert_eq!(v["error"]["field"], "class_id");
    let (st, _) = srv
        .post(&format!("/v1/sessions/{id}/gestures"), json!({"v": 1, "class_id": 2}))
        .await;
    assert_eq!(st, 400);
}

#[tokio::test]
async fn images_are_classified() {
    let srv = start().await;
    let id = srv.accelerated(2, quiet()).await;
    srv.gesture(&id, 1, 0.9).await;
    srv.wait_idle(&id).await;
    let t0 = srv.state(&id).await.tick;

    let glyph = synth_gesture_image(&GestureClass::new(2).unwrap(), &DrParams::identity(), 32, 32).unwrap();
    let pgm = encode_pgm(&glyph).unwrap();
    let r = srv
        .http
        .post(format!("{}/v1/sessions/{id}/gestures", srv.base))
        .header("content-type", "image/x-portable-graymap")
        .body(pgm.clone())
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let ack: Value = r.json().await.unwrap();
    assert_eq!(
        (ack["status"].as_str(), ack["class_id"].as_u64()),
        (Some("accepted"), Some(2))
    );
    srv.wait_idle(&id).await;

    let frames = srv
        .read_ws(&format!("/v1/sessions/{id}/stream?last_tick={t0}"), 1)
        .await;
    match &frames[0] {
        StreamFrame::Tick(t) => match &t.outcome {
            Some(GestureOutcome::Accepted { command, .. }) => assert_eq!(*command, CommandKind::Forward),
            o => panic!("{o:?}"),
        },
        f => panic!("{f:?}"),
    }

    let b64 = base64::engine::general_purpose::STANDARD.encode(&pgm);
    let ack = srv
        .post(
            &format!("/v1/sessions/{id}/gestures"),
            json!({"v": 1, "pgm_base64": b64}),
        )
        .await
        .1;
    assert_eq!(ack["class_id"], 2);

    let (st, v) = srv
        .post(
            &format!("/v1/sessions/{id}/gestures"),
            json!({"v": 1, "pgm_base64": "UDUKbm9wZQ=="}),
        )
        .await;
    assert_eq!((st, v["error"]["code"].as_str()), (400, Some("bad_image")));
    let r = srv
        .http
        .post(format!("{}/v1/sessions/{id}/gestures", srv.base))
        .header("content-type", "image/png")
        .body(vec![0u8; 8])
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 415);
}

#[tokio::test]
async fn stream_is_gapless_and_resumable() {
    let srv = start().await;
    let id = srv.accelerated(3, quiet()).await;
    // subscribe before anything flies so every tick is seen live
    let reader = {
        let path = format!("/v1/sessions/{id}/stream");
        let ws = srv.ws.clone();
        tokio::spawn(async move {
            let (mut ws, _) = tokio_tungstenite::connect_async(format!("{ws}{path}")).await.unwrap();
            let mut out = Vec::new();
            use futures::StreamExt;
            while out.len() < 1000 {
                if let Some(Ok(tokio_tungstenite::tungstenite::Message::Text(t))) = ws.next().await {
                    out.push(serde_json::from_str::<StreamFrame>(&t).unwrap());
                }
            }
            out
        })
    };
    tokio::time::sleep(Duration::from_millis(100)).await;
    srv.gesture(&id, 1, 0.9).await;
    for i in 0..100 {
        srv.gesture(&id, if i % 2 == 0 { 2 } else { 3 }, 0.9).await;
    }
    let frames = tokio::time::timeout(Duration::from_secs(60), reader)
        .await
        .unwrap()
        .unwrap();
    let ts = ticks(&frames);
    assert_eq!(ts.len(), 1000, "gap frames in a live stream");
    assert!(ts.iter().enumerate().all(|(i, &t)| t == i as u64 + 1));

    // altitude rises monotonically to hover height during the takeoff
    let mut z = Vec::new();
    for f in &frames {
        if let StreamFrame::Tick(t) = f {
            if t.command != Some(CommandKind::Takeoff) && !z.is_empty() {
                break;
            }
            z.push(t.est.position[2]);
        }
    }
    assert!(z.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!((z.last().unwrap() - 1.5).abs() < 1e-6);

    srv.wait_idle(&id).await;
    let resumed = srv.read_ws(&format!("/v1/sessions/{id}/stream?last_tick=500"), 3).await;
    assert_eq!(ticks(&resumed), vec![501, 502, 503]);
}

#[tokio::test]
async fn resume_beyond_history_reports_gap() {
    let srv = start_with(StreamOptions {
        capacity: 64,
        history: 10,
    })
    .await;
    let id = srv.accelerated(4, quiet()).await;
    srv.gesture(&id, 1, 0.9).await;
    srv.gesture(&id, 2, 0.9).await;
    let s = srv.wait_idle(&id).await;
    assert_eq!(s.tick, 24);
    let frames = srv.read_ws(&format!("/v1/sessions/{id}/stream?last_tick=5"), 11).await;
    assert_eq!(
        frames[0],
        StreamFrame::Gap(gmob_gcs::protocol::GapFrame {
            v: 1,
            from_tick: 6,
            to_tick: s.tick - 10
        })
    );
    assert_eq!(ticks(&frames[1..]), ((s.tick - 9)..=s.tick).collect::<Vec<_>>());
}

#[tokio::test]
async fn stalled_subscriber_does_not_stall_the_loop() {
    let cfg = PipelineConfig::default();
    let s = Session::start(
        "bp".into(),
        cfg,
        5,
        ClockMode::Accelerated,
        false,
        StreamOptions {
            capacity: 8,
            history: 0,
        },
    )
    .unwrap();
    let mut cursor = s.subscribe(None);
    s.submit(1, 0.9, Quartile::TL).unwrap();
    s.submit(2, 0.9, Quartile::TL).unwrap();
    let t0 = std::time::Instant::now();
    while !s.snapshot().idle {
        assert!(
            t0.elapsed() < Duration::from_secs(10),
            "loop stalled behind a stalled subscriber"
        );
        std::thread::sleep(Duration::from_millis(2));
    }
    let total = s.snapshot().tick;
    assert_eq!(total, 24);
    let first: StreamFrame = serde_json::from_str(&cursor.next().await.unwrap()).unwrap();
    // the oldest frames were dropped; the 8 newest survive
    assert_eq!(
        first,
        StreamFrame::Gap(gmob_gcs::protocol::GapFrame {
            v: 1,
            from_tick: 1,
            to_tick: total - 8
        })
    );
    for want in (total - 7)..=total {
        let f: StreamFrame = serde_json::from_str(&cursor.next().await.unwrap()).unwrap();
        assert!(matches!(f, StreamFrame::Tick(t) if t.tick == want));
    }
}

#[tokio::test]
async fn logs_replay_and_missions() {
    let srv = start().await;
    let id = srv.accelerated(6, json!({"reject_hold_ticks": 100})).await;
    let (st, text) = srv.log_text(&id, "").await;
    assert_eq!((st, text.as_str()), (200, ""));

    // land while on the ground: refused at dequeue, then 100 logged hover ticks
    srv.gesture(&id, 0, 0.9).await;
    srv.wait_idle(&id).await;
    let (_, text) = srv.log_text(&id, "").await;
    assert_eq!(text.lines().count(), 100);
    assert!(text.lines().all(|l| l.ends_with(RowStatus::Rejected.as_str())));
    let frames = srv
        .read_ws(&format!("/v1/sessions/{id}/replay?pace=accelerated"), usize::MAX)
        .await;
    assert_eq!(frames.len(), 100);
    assert_eq!(ticks(&frames), (1..=100).collect::<Vec<_>>());
    let paced = std::time::Instant::now();
    let frames = srv
        .read_ws(&format!("/v1/sessions/{id}/replay?pace=10"), usize::MAX)
        .await;
    assert_eq!(frames.len(), 100);
    // 99 ticks of 0.05 s at 10x
    assert!(paced.elapsed() >= Duration::from_millis(480));

    let mission = Mission::LShape {
        w: 2.0,
        h: 1.0,
        alt: 1.0,
    };
    let (st, v) = srv
        .post(
            &format!("/v1/sessions/{id}/mission"),
            json!({"v": 1, "mission": mission, "seed": 11}),
        )
        .await;
    assert_eq!(st, 200, "{v}");
    let cfg = PipelineConfig::from_toml_str("reject_hold_ticks = 100").unwrap();
    let lib = run_mission(&mission, &cfg, &Classifier::from_config(&cfg).unwrap(), 11).unwrap();
    let file = srv.data_dir.path().join(v["file"].as_str().unwrap());
    assert_eq!(std::fs::read_to_string(file).unwrap(), lib.log.to_text());
    let (_, text) = srv.log_text(&id, "?source=mission").await;
    assert_eq!(text, lib.log.to_text());
    assert_eq!(v["rows"].as_u64().unwrap() as usize, lib.log.len());
    let replayed = srv
        .read_ws(
            &format!("/v1/sessions/{id}/replay?source=mission&pace=accelerated"),
            usize::MAX,
        )
        .await;
    assert_eq!(replayed.len(), lib.log.len());

    let (st, _) = srv.log_text(&id, "?source=elsewhere").await;
    assert_eq!(st, 422);

    let r = srv
        .http
        .delete(format!("{}/v1/sessions/{id}", srv.base))
        .send()
        .await
        .unwrap();
    let closed: Value = r.json().await.unwrap();
    let live = std::fs::read_to_string(srv.data_dir.path().join(closed["file"].as_str().unwrap())).unwrap();
    assert_eq!(live.lines().count(), 100);
    assert!(closed["file"].as_str().unwrap().starts_with(&id));
    assert_eq!(
        srv.http
            .get(format!("{}/v1/sessions/{id}", srv.base))
            .send()
            .await
            .unwrap()
            .status(),
        404
    );
}

#[tokio::test]
async fn mission_conflicts_with_active_segment() {
    let srv = start().await;
    let id = srv.create(json!({"v": 1, "clock": "realtime"})).await;
    srv.gesture(&id, 1, 0.9).await;
    let (st, v) = srv.post(&format!("/v1/sessions/{id}/mission"), json!({"v": 1})).await;
    assert_eq!((st, v["error"]["code"].as_str()), (409, Some("conflict")));
}

/// Library reference: submit each gesture when idle, fly to idle.
fn solo(seed: u64, gestures: &[(usize, f64, Quartile)]) -> String {
    let mut fl = FlightLoop::new(&PipelineConfig::default(), seed).unwrap();
    for &(c, p, q) in gestures {
        if p < 0.5 {
            continue;
        }
        fl.submit(c, p, q).unwrap();
        fl.run_until_idle(|_| {}).unwrap();
    }
    fl.log.to_text()
}

#[tokio::test]
async fn sessions_are_isolated() {
    let srv = start().await;
    for case in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let mut scripts: Vec<Vec<(usize, f64, Quartile)>> = Vec::new();
        for _ in 0..2 {
            let mut g = vec![(1, 0.9, Quartile::TL)];
            for _ in 0..rng.random_range(3..8) {
                let q = Quartile::ALL[rng.random_range(0..4)];
                g.push((rng.random_range(0..10), rng.random_range(0.3..1.0), q));
            }
            scripts.push(g);
        }
        let seed = 100 + case;
        let ids = [
            srv.accelerated(seed, json!({})).await,
            srv.accelerated(seed, json!({})).await,
        ];
        let longest = scripts.iter().map(Vec::len).max().unwrap();
        for i in 0..longest {
            for (id, g) in ids.iter().zip(&scripts) {
                if let Some(&(c, p, q)) = g.get(i) {
                    srv.post(
                        &format!("/v1/sessions/{id}/gestures"),
                        json!({"v": 1, "class_id": c, "confidence": p, "quartile": q}),
                    )
                    .await;
                }
            }
        }
        for (id, g) in ids.iter().zip(&scripts) {
            srv.wait_idle(id).await;
            let got = srv.log_text(id, "").await.1;
            let want = solo(seed, g);
            if got != want {
                let n = got.lines().zip(want.lines()).take_while(|(a, b)| a == b).count();
                panic!(
                    "case {case} {g:?}: {} vs {} rows, first diff at {n}\n{}\n{}",
                    got.lines().count(),
                    want.lines().count(),
                    got.lines().nth(n).unwrap_or(""),
                    want.lines().nth(n).unwrap_or("")
                );
            }
        }
    }
}
