use std::collections::HashMap;
use std::sync::Mutex;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, Script, ScriptEntry, ScriptKey};

/// Wraps a backend and writes down every successful exchange as a script
/// entry, so any run (live or scripted) can be replayed later.
/// Recorded entries and the next turn number per (agent, step).
type Tape = (Vec<ScriptEntry>, HashMap<(String, u32), u32>);

pub struct RecordingBackend<B> {
    inner: B,
    state: Mutex<Tape>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            state: Mutex::new((Vec::new(), HashMap::new())),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn recorded(&self) -> Script {
        Script::new(self.state.lock().expect("recording lock").0.clone())
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let response = self.inner.complete(req)?;
        let mut state = self.state.lock().expect("recording lock");
        let counter = state
            .1
            .entry((req.meta.agent.clone(), req.meta.step))
            .or_insert(0);
        let turn = *counter;
        *counter += 1;
        state.0.push(ScriptEntry {
            key: ScriptKey {
                agent: req.meta.agent.clone(),
                step: req.meta.step,
                turn,
            },
            response: response.clone(),
        });
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::Message;
    use crate::llm::{CallMeta, ScriptedBackend, TokenUsage};

    #[test]
    fn recording_of_scripted_run_is_the_script() {
        let script = Script::new(vec![
            ScriptEntry {
                key: ScriptKey { agent: "A".into(), step: 1, turn: 0 },
                response: ChatResponse::text("one", TokenUsage::new(5, 1)),
            },
            ScriptEntry {
                key: ScriptKey { agent: "A".into(), step: 1, turn: 1 },
                response: ChatResponse::text("two", TokenUsage::new(6, 1)),
            },
        ]);
        let rec = RecordingBackend::new(ScriptedBackend::new(script.clone()));
        let req = ChatRequest::new(
            "m",
            vec![Message::human("user", "x")],
            CallMeta { agent: "A".into(), step: 1 },
        );
        rec.complete(&req).unwrap();
        rec.complete(&req).unwrap();
        assert_eq!(rec.recorded(), script);
    }
}
