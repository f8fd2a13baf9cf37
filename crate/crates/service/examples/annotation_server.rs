//! Serves a synthetic dataset's pair tasks over HTTP.
//!
//!     cargo run -p reltrav-service --example annotation_server -- [port]
//!     curl -H 'x-session: me' localhost:8080/api/tasks/next
//!     curl -X POST -H 'x-session: me' -d '{"t": 1}' localhost:8080/api/tasks/pair-000000/label
//!     curl localhost:8080/api/progress

use std::sync::Arc;

use reltrav::synthworld::{build_synth_dataset, SynthConfig};
use reltrav_service::{serve, TaskService};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).map_or(Ok(8080), |s| s.parse())?;
    let dir = std::env::temp_dir().join("reltrav-serve");
    let paths = build_synth_dataset(0, 10, &SynthConfig::default())?.write(&dir)?;
    let svc = TaskService::open(&paths.manifest, &paths.tasks, dir.join("human.jsonl"))?;
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    println!("{} tasks on http://{}", svc.tasks().len(), listener.local_addr()?);
    serve(listener, Arc::new(svc)).await?;
    Ok(())
}
