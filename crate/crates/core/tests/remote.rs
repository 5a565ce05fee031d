mod common;

use std::io::{BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use lstgrid::engine::protocol::{read_message, write_message, JobMessage, Message};
use lstgrid::engine::{
    run_task, serve_worker, EngineError, Operation, Payload, RemoteExecutor, RunOptions, Task, TaskOutput,
    WorkerDescriptor, WorkerOptions, PROTOCOL_VERSION,
};
use lstgrid::{RasterGrid, DEFAULT_NODATA};

use common::{bits, dn_scene, lst_params, reflectance_params, tm_context};

fn connect(addr: &str) -> (BufReader<TcpStream>, TcpStream) {
    let s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    (BufReader::new(s.try_clone().unwrap()), s)
}

#[test]
fn mismatched_version_is_rejected_cleanly() {
    let w = serve_worker("127.0.0.1:0", WorkerOptions::default()).unwrap();
    let (mut r, mut s) = connect(&w.local_addr().to_string());
    write_message(&mut s, &Message::Hello { version: PROTOCOL_VERSION + 1 }).unwrap();
    match read_message(&mut r).unwrap() {
        Message::Error { job_id: 0, reason } => assert!(reason.contains("version"), "{reason}"),
        other => panic!("expected ERROR, got {other:?}"),
    }
    // and the worker hangs up
    assert!(read_message(&mut r).is_err());

    // The coordinator surfaces it as a handshake error.
    let mut fake = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = fake.local_addr().unwrap().to_string();
    let h = thread::spawn(move || reject_everything(&mut fake));
    match RemoteExecutor::connect(&addr, &RunOptions::default()) {
        Err(EngineError::Handshake(m)) => assert!(m.contains("version")),
        other => panic!("{:?}", other.err()),
    }
    h.join().unwrap();
    w.shutdown();
}

fn reject_everything(l: &mut TcpListener) {
    let (s, _) = l.accept().unwrap();
    let mut r = BufReader::new(s.try_clone().unwrap());
    let mut w = s;
    let _ = read_message(&mut r).unwrap();
    write_message(
        &mut w,
        &Message::Error {
            job_id: 0,
            reason: "unsupported protocol version 1".into(),
        },
    )
    .unwrap();
}

#[test]
fn two_by_two_job_round_trip_is_bit_exact() {
    let w = serve_worker("127.0.0.1:0", WorkerOptions::default()).unwrap();
    let (mut r, mut s) = connect(&w.local_addr().to_string());
    write_message(&mut s, &Message::Hello { version: PROTOCOL_VERSION }).unwrap();
    assert_eq!(read_message(&mut r).unwrap(), Message::HelloAck);

    let tile = RasterGrid::new(2, 2, vec![0.1 + 0.2, -0.0, f64::MIN_POSITIVE, DEFAULT_NODATA], DEFAULT_NODATA).unwrap();
    write_message(
        &mut s,
        &Message::Job(JobMessage {
            job_id: 77,
            op: Operation::Identity,
            bands: vec![tile.clone()],
        }),
    )
    .unwrap();
    match read_message(&mut r).unwrap() {
        Message::Result {
            job_id: 77,
            payload: Payload::Raster { grid, flagged: 0 },
            ..
        } => {
            assert_eq!(bits(&grid), bits(&tile));
            assert_eq!(grid.nodata(), DEFAULT_NODATA);
        }
        other => panic!("{other:?}"),
    }

    // Failing kernels answer ERROR with the job id; the connection survives.
    let bad = RasterGrid::filled(2, 2, 300.0, DEFAULT_NODATA).unwrap();
    write_message(
        &mut s,
        &Message::Job(JobMessage {
            job_id: 78,
            op: Operation::Histogram { max_dn: 255 },
            bands: vec![bad],
        }),
    )
    .unwrap();
    assert!(matches!(read_message(&mut r).unwrap(), Message::Error { job_id: 78, .. }));
    write_message(&mut s, &Message::Ping).unwrap();
    assert_eq!(read_message(&mut r).unwrap(), Message::Pong);
    w.shutdown();
}

/// Completes the handshake, then never answers again.
fn mute_worker() -> (String, thread::JoinHandle<()>) {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    let h = thread::spawn(move || {
        let (s, _) = l.accept().unwrap();
        let mut r = BufReader::new(s.try_clone().unwrap());
        let mut w = s;
        let _ = read_message(&mut r);
        write_message(&mut w, &Message::HelloAck).unwrap();
        w.flush().unwrap();
        // swallow everything until the coordinator gives up
        while read_message(&mut r).is_ok() {}
    });
    (addr, h)
}

#[test]
fn ping_timeout_declares_worker_dead() {
    assert_eq!(RunOptions::default().ping_timeout, Duration::from_secs(10));

    let (addr, h) = mute_worker();
    let opts = RunOptions {
        ping_timeout: Duration::from_millis(200),
        ..RunOptions::default()
    };
    let mut exec = RemoteExecutor::connect(&addr, &opts).unwrap();
    let start = Instant::now();
    assert!(exec.ping().is_err());
    assert!(start.elapsed() >= Duration::from_millis(150));
    drop(exec);
    h.join().unwrap();

    // In a task, the silent worker is dropped and a healthy one finishes.
    let (addr, h) = mute_worker();
    let healthy = serve_worker("127.0.0.1:0", WorkerOptions::default()).unwrap();
    let g = common::random_dn(30, 40, 1);
    let task = Task::new(Operation::Identity, vec![g]).unwrap();
    let opts = RunOptions {
        ping_timeout: Duration::from_millis(200),
        heartbeat_after: Duration::ZERO,
        static_tiling: true,
        ..RunOptions::default()
    };
    let workers = [
        WorkerDescriptor::remote(addr),
        WorkerDescriptor::remote(healthy.local_addr().to_string()),
    ];
    assert_eq!(run_task(&task, &workers, &opts).unwrap(), task.run_direct().unwrap());
    h.join().unwrap();
    healthy.shutdown();
}

#[test]
fn remote_and_local_mixed_pool_matches_direct() {
    let s = dn_scene(300, 211, 3);
    let ctx = tm_context(2.3);
    let task = Task::new(
        Operation::Pipeline {
            red: reflectance_params(&ctx, "3", 1.5),
            nir: reflectance_params(&ctx, "4", 0.5),
            lst: lst_params(&ctx),
        },
        vec![s.red, s.nir, s.thermal],
    )
    .unwrap();
    let w1 = serve_worker("127.0.0.1:0", WorkerOptions::default()).unwrap();
    let w2 = serve_worker("127.0.0.1:0", WorkerOptions::default()).unwrap();
    let workers = [
        WorkerDescriptor::local(2),
        WorkerDescriptor {
            capacity: 2,
            ..WorkerDescriptor::remote(w1.local_addr().to_string())
        },
        WorkerDescriptor::remote(w2.local_addr().to_string()),
    ];
    let direct = task.run_direct().unwrap();
    for static_tiling in [false, true] {
        let opts = RunOptions {
            static_tiling,
            ..RunOptions::default()
        };
        let out = run_task(&task, &workers, &opts).unwrap();
        let (TaskOutput::Raster { grid: a, .. }, TaskOutput::Raster { grid: b, .. }) = (&out, &direct) else {
            panic!()
        };
        assert_eq!(bits(a), bits(b));
    }
    w1.shutdown();
    w2.shutdown();
}

#[test]
fn all_remote_workers_dying_fails_the_task() {
    let doomed = serve_worker(
        "127.0.0.1:0",
        WorkerOptions {
            fail_after_results: Some(1),
        },
    )
    .unwrap();
    let task = Task::new(Operation::Identity, vec![common::random_dn(10, 20, 2)]).unwrap();
    let opts = RunOptions {
        tiles: Some(5),
        ..RunOptions::default()
    };
    let err = run_task(&task, &[WorkerDescriptor::remote(doomed.local_addr().to_string())], &opts).unwrap_err();
    match err {
        EngineError::NoLiveWorkers(ids) => assert_eq!(ids.len(), 4),
        other => panic!("{other:?}"),
    }
    // A killed worker no longer accepts coordinators.
    assert!(RemoteExecutor::connect(
        &doomed.local_addr().to_string(),
        &RunOptions {
            connect_timeout: Duration::from_millis(300),
            ping_timeout: Duration::from_millis(300),
            ..RunOptions::default()
        }
    )
    .is_err());
}

#[test]
fn remote_job_errors_exhaust_retries() {
    let w = serve_worker("127.0.0.1:0", WorkerOptions::default()).unwrap();
    let bad = RasterGrid::filled(4, 4, 256.0, DEFAULT_NODATA).unwrap();
    let task = Task::new(Operation::Histogram { max_dn: 255 }, vec![bad]).unwrap();
    let opts = RunOptions {
        retry_limit: 3,
        tiles: Some(1),
        ..RunOptions::default()
    };
    match run_task(&task, &[WorkerDescriptor::remote(w.local_addr().to_string())], &opts) {
        Err(EngineError::JobFailed { job_id: 0, attempts: 4, reason }) => assert!(reason.contains("256")),
        other => panic!("{other:?}"),
    }
    w.shutdown();
}
