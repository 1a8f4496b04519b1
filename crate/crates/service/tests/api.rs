use std::time::Duration;

use serde_json::{json, Value};

use rehabxai_service::{AppState, ServiceConfig};

struct Server {
    base: String,
    client: reqwest::Client,
    _dir: tempfile::TempDir,
}

async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(&ServiceConfig::new(dir.path())).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(rehabxai_service::serve_on(listener, state));
    Server { base, client: reqwest::Client::new(), _dir: dir }
}

impl Server {
    async fn call(&self, req: reqwest::RequestBuilder) -> (u16, Value) {
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        let text = resp.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        self.call(self.client.post(format!("{}{path}", self.base)).json(&body)).await
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        self.call(self.client.get(format!("{}{path}", self.base))).await
    }

    async fn small_dataset(&self) -> String {
        let (status, body) = self.post("/datasets", json!({ "synthetic": { "n_subjects": 3 }, "seed": 5 })).await;
        assert_eq!(status, 201, "{body}");
        body["id"].as_str().unwrap().to_string()
    }

    async fn wait(&self, job: &Value) -> Value {
        let id = job["job_id"].as_str().unwrap();
        for _ in 0..600 {
            let (status, j) = self.get(&format!("/jobs/{id}")).await;
            assert_eq!(status, 200);
            if matches!(j["state"].as_str(), Some("done") | Some("failed")) {
                return j;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        panic!("job {id} did not finish");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn dataset_ids_are_content_addressed() {
    let s = start().await;
    let a = s.small_dataset().await;
    let b = s.small_dataset().await;
    assert_eq!(a, b);
    let (status, list) = s.get("/datasets").await;
    assert_eq!(status, 200);
    assert_eq!(list["datasets"], json!([a]));
    let (status, d) = s.get(&format!("/datasets/{a}")).await;
    assert_eq!(status, 200);
    assert_eq!(d["trials"].as_array().unwrap().len(), 3 * 20);
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_resources_are_404() {
    let s = start().await;
    for path in ["/models/nope", "/spaces/nope", "/sessions/nope", "/jobs/nope", "/datasets/nope", "/no/such/route"] {
        assert_eq!(s.get(path).await.0, 404, "{path}");
    }
    let (status, body) = s.post("/models/train", json!({ "dataset_id": "nope", "component": "ROM" })).await;
    assert_eq!(status, 404);
    assert!(body["error"].is_string());
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_requests_are_400() {
    let s = start().await;
    let (status, body) = s.post("/datasets", json!({ "synthetic": { "n_subjects": 0 } })).await;
    assert_eq!(status, 400, "{body}");
    assert_eq!(s.post("/models/train", json!({ "component": "ROM" })).await.0, 400);
    let (status, _) = s
        .call(s.client.post(format!("{}/datasets", s.base)).header("content-type", "application/json").body("{"))
        .await;
    assert_eq!(status, 400);
    assert_eq!(s.get("/explain?case=x&k=abc").await.0, 400);
    assert_eq!(s.get("/sessions/bad%20id").await.0, 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn training_runs_as_a_job_and_dedups() {
    let s = start().await;
    let dataset = s.small_dataset().await;
    let request = json!({ "dataset_id": dataset, "component": "COMP", "epochs": 2, "seed": 9 });
    let (status, job) = s.post("/models/train", request.clone()).await;
    assert_eq!(status, 202);
    let first = s.wait(&job).await;
    assert_eq!(first["state"], "done", "{first}");
    let (_, again) = s.post("/models/train", request).await;
    let second = s.wait(&again).await;
    assert_eq!(first["result"], second["result"]);

    let model_id = first["result"].as_str().unwrap();
    let (status, model) = s.get(&format!("/models/{model_id}")).await;
    assert_eq!(status, 200);
    assert_eq!(model["component"], "COMP");
    assert!(model["loso"]["f1"].is_number());

    let (status, p) = s.post(&format!("/models/{model_id}/predict"), json!({ "trial_id": "S01-A-01" })).await;
    assert_eq!(status, 200, "{p}");
    let c = p["confidence"].as_f64().unwrap();
    assert!((0.5..=1.0).contains(&c));
    assert_eq!(s.post(&format!("/models/{model_id}/predict"), json!({ "features": [1.0] })).await.0, 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn explain_validates_k() {
    let s = start().await;
    let dataset = s.small_dataset().await;
    let mut spaces = Vec::new();
    for component in ["ROM", "COMP"] {
        let (_, job) =
            s.post("/models/train", json!({ "dataset_id": dataset, "component": component, "epochs": 2 })).await;
        let model = s.wait(&job).await["result"].as_str().unwrap().to_string();
        let (status, job) = s.post("/spaces/build", json!({ "model_id": model, "method": "pca" })).await;
        assert_eq!(status, 202);
        let done = s.wait(&job).await;
        assert_eq!(done["state"], "done", "{done}");
        spaces.push(done["result"].as_str().unwrap().to_string());
    }
    let base = format!("/explain?case=S02-A-03&rom_space={}&comp_space={}", spaces[0], spaces[1]);
    let (status, ok) = s.get(&format!("{base}&k=4")).await;
    assert_eq!(status, 200, "{ok}");
    assert_eq!(ok["examples"]["comp"]["neighbors"].as_array().unwrap().len(), 4);
    assert_eq!(ok["decision"].as_array().unwrap().len(), 2);
    assert_eq!(s.get(&format!("{base}&k=0")).await.0, 400);
    assert_eq!(s.get(&format!("{base}&k=60")).await.0, 400);
    assert_eq!(s.get(&format!("/explain?case=S02-A-03&rom_space={}", spaces[0])).await.0, 400);
    assert_eq!(s.get(&format!("/explain?case=S09-A-01&rom_space={}&comp_space={}", spaces[0], spaces[1])).await.0, 404);
}
