//! Thin HTTP adapter implementing the forge-client contract against a
//! remote forge service.
//!
//! Wire format: `POST {base}/op` with a JSON operation body returns
//! `{"status":"ok","response":{…}}` or `{"status":"error","error":{…}}`;
//! `GET {base}/metrics` returns the metrics snapshot. Transport failures
//! are retried a few times, then surface as backend errors so the replay
//! records a skip and moves on.

use serde::Deserialize;

use forgefuzz::replay::{ForgeClient, ForgeError, ForgeMetrics, PrStatus, PushStats};
use forgefuzz::simforge::{ForgeOp, ForgeResponse};

pub struct HttpForge {
    base: String,
    agent: ureq::Agent,
    retries: u32,
}

#[derive(Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum WireResult {
    Ok { response: ForgeResponse },
    Error { error: ForgeError },
}

impl HttpForge {
    pub fn new(base_url: &str) -> HttpForge {
        HttpForge {
            base: base_url.trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_defaults(),
            retries: 3,
        }
    }

    fn post(&mut self, op: &ForgeOp) -> Result<ForgeResponse, ForgeError> {
        let url = format!("{}/op", self.base);
        let mut last_err = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(50 << attempt));
            }
            match self.agent.post(&url).send_json(op) {
                Ok(mut resp) => {
                    let wire: WireResult = resp
                        .body_mut()
                        .read_json()
                        .map_err(|e| ForgeError::Backend(format!("bad response body: {e}")))?;
                    return match wire {
                        WireResult::Ok { response } => Ok(response),
                        WireResult::Error { error } => Err(error),
                    };
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(ForgeError::Backend(format!(
            "{url} unreachable after {} attempts: {last_err}",
            self.retries + 1
        )))
    }

    fn expect_unit(&mut self, op: ForgeOp) -> Result<(), ForgeError> {
        self.post(&op).map(|_| ())
    }
}

impl ForgeClient for HttpForge {
    fn user_exists(&mut self, name: &str) -> Result<bool, ForgeError> {
        match self.post(&ForgeOp::UserExists { name: name.into() })? {
            ForgeResponse::Bool(b) => Ok(b),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn create_user(&mut self, name: &str) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::CreateUser { name: name.into() })
    }

    fn repo_exists(&mut self, actor: &str, name: &str) -> Result<bool, ForgeError> {
        let op = ForgeOp::RepoExists {
            actor: actor.into(),
            name: name.into(),
        };
        match self.post(&op)? {
            ForgeResponse::Bool(b) => Ok(b),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn create_repo(&mut self, actor: &str, name: &str) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::CreateRepo {
            actor: actor.into(),
            name: name.into(),
        })
    }

    fn star(&mut self, user: &str, repo: &str) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::Star {
            user: user.into(),
            repo: repo.into(),
        })
    }

    fn fork(&mut self, user: &str, repo: &str) -> Result<String, ForgeError> {
        let op = ForgeOp::Fork {
            user: user.into(),
            repo: repo.into(),
        };
        match self.post(&op)? {
            ForgeResponse::ForkRepo(name) => Ok(name),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn ensure_member(&mut self, user: &str, repo: &str) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::EnsureMember {
            user: user.into(),
            repo: repo.into(),
        })
    }

    fn push(
        &mut self,
        user: &str,
        repo: &str,
        branch: &str,
        text: &str,
    ) -> Result<PushStats, ForgeError> {
        let op = ForgeOp::Push {
            user: user.into(),
            repo: repo.into(),
            branch: branch.into(),
            text: text.into(),
        };
        match self.post(&op)? {
            ForgeResponse::Push(stats) => Ok(stats),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn find_open_pr(
        &mut self,
        actor: &str,
        repo: &str,
        branch: &str,
    ) -> Result<Option<u64>, ForgeError> {
        let op = ForgeOp::FindOpenPr {
            actor: actor.into(),
            repo: repo.into(),
            branch: branch.into(),
        };
        match self.post(&op)? {
            ForgeResponse::MaybePr(id) => Ok(id),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn latest_pr(
        &mut self,
        actor: &str,
        repo: &str,
        branch: &str,
    ) -> Result<Option<(u64, PrStatus)>, ForgeError> {
        let op = ForgeOp::LatestPr {
            actor: actor.into(),
            repo: repo.into(),
            branch: branch.into(),
        };
        match self.post(&op)? {
            ForgeResponse::LatestPr(r) => Ok(r),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn open_pr(
        &mut self,
        user: &str,
        repo: &str,
        branch: &str,
        text: &str,
    ) -> Result<u64, ForgeError> {
        let op = ForgeOp::OpenPr {
            user: user.into(),
            repo: repo.into(),
            branch: branch.into(),
            text: text.into(),
        };
        match self.post(&op)? {
            ForgeResponse::PrId(id) => Ok(id),
            other => Err(ForgeError::Backend(format!(
                "unexpected response {other:?}"
            ))),
        }
    }

    fn merge_pr(&mut self, actor: &str, id: u64) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::MergePr {
            actor: actor.into(),
            id,
        })
    }

    fn close_pr(&mut self, actor: &str, id: u64) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::ClosePr {
            actor: actor.into(),
            id,
        })
    }

    fn reopen_pr(&mut self, actor: &str, id: u64) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::ReopenPr {
            actor: actor.into(),
            id,
        })
    }

    fn follow(&mut self, user: &str, target: &str) -> Result<(), ForgeError> {
        self.expect_unit(ForgeOp::Follow {
            user: user.into(),
            target: target.into(),
        })
    }

    fn snapshot_metrics(&mut self) -> Result<ForgeMetrics, ForgeError> {
        let url = format!("{}/metrics", self.base);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| ForgeError::Backend(format!("{url}: {e}")))?;
        resp.body_mut()
            .read_json()
            .map_err(|e| ForgeError::Backend(format!("bad metrics body: {e}")))
    }
}
