//! Chat-completion backend. Prompts live in `prompts/`; replies are parsed
//! from a single fenced block. [`ScriptedResponder`] answers the same prompts
//! offline and stands in for a live endpoint in tests (`mock:scripted`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::scripted::ScriptedTeacher;
use super::{
    FeedbackEvent, FeedbackKind, LabeledSnapshot, NewPrecondition, PreconditionLedger, PredicateSpec, ReasonContext,
    ReasonerOutput, TeacherBackendConfig, TeacherError, TeacherModules,
};
use crate::dsl::{
    parse_program, print_item, print_program, Atom, ExecError, Expr, ItemKind, Literal, Predicate, Program, Registry,
    NEG_PREFIX,
};
use crate::world::{DomainId, GroundedAction, PerceptionSnapshot};

const SYSTEM: &str = include_str!("../../prompts/system.txt");
const REASON: &str = include_str!("../../prompts/reason.txt");
const CODE: &str = include_str!("../../prompts/code.txt");
const CORRECT_EXECUTION: &str = include_str!("../../prompts/correct_execution.txt");
const CORRECT_ALIGNMENT: &str = include_str!("../../prompts/correct_alignment.txt");
const TRANSLATE_GOAL: &str = include_str!("../../prompts/translate_goal.txt");

const MAX_PROMPT_LABELS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage { role: role.to_string(), content: content.into() }
    }
}

/// One prompt and the reply it got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub module: String,
    pub attempt: u32,
    pub prompt: String,
    pub response: String,
}

pub trait ChatTransport: Send {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, TeacherError>;
}

/// OpenAI-style `chat/completions` over HTTP. The bearer token is read from
/// `PREDLEARN_API_KEY` when set.
#[cfg(feature = "remote")]
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

#[cfg(feature = "remote")]
impl HttpTransport {
    pub fn new(endpoint: &str, model: &str, timeout_secs: u64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(timeout_secs)))
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: std::env::var("PREDLEARN_API_KEY").ok().filter(|k| !k.is_empty()),
        }
    }
}

#[cfg(feature = "remote")]
impl ChatTransport for HttpTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, TeacherError> {
        let body = json!({ "model": self.model, "messages": messages, "temperature": 0 });
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| TeacherError::Transport(e.to_string()))?;
        let v: serde_json::Value = resp.body_mut().read_json().map_err(|e| TeacherError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| TeacherError::BadResponse("no choices[0].message.content".to_string()))
    }
}

/// Contents of the first fenced block tagged `lang`, or of the only
/// untagged block.
pub fn fenced<'a>(text: &'a str, lang: &str) -> Option<&'a str> {
    let open = format!("```{lang}");
    let mut rest = text;
    while let Some(i) = rest.find(&open) {
        let after = &rest[i + open.len()..];
        if let Some(nl) = after.find('\n') {
            if after[..nl].trim().is_empty() {
                let body = &after[nl + 1..];
                return body.find("```").map(|j| &body[..j]);
            }
        }
        rest = after;
    }
    None
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in vars {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

fn literal_map(lits: &[Literal]) -> BTreeMap<String, bool> {
    lits.iter().map(|l| (l.atom.to_string(), l.value)).collect()
}

fn literals_from_map(m: &BTreeMap<String, bool>) -> Result<Vec<Literal>, TeacherError> {
    m.iter()
        .map(|(k, v)| {
            let atom: Atom = k.parse().map_err(|_| TeacherError::BadResponse(format!("bad literal `{k}`")))?;
            Ok(positive_literal(Literal::new(atom, *v)))
        })
        .collect()
}

/// Rewrites `neg_p(x): v` as `p(x): !v`.
fn positive_literal(l: Literal) -> Literal {
    match l.atom.predicate.strip_prefix(NEG_PREFIX) {
        Some(p) => Literal::new(Atom { predicate: p.to_string(), args: l.atom.args }, !l.value),
        None => l,
    }
}

fn ledger_map(ledger: &PreconditionLedger) -> BTreeMap<String, BTreeMap<String, bool>> {
    ledger
        .entries
        .iter()
        .map(|(s, lits)| (s.clone(), lits.iter().map(|l| (l.atom.to_string(), l.value)).collect()))
        .collect()
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PreconditionReply {
    schema: String,
    literals: BTreeMap<String, bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ReasonReply {
    #[serde(default)]
    new_predicates: Vec<PredicateSpec>,
    #[serde(default)]
    labels: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    new_preconditions: Option<PreconditionReply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbolic_goal: Option<BTreeMap<String, bool>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReasonContextJson {
    domain: DomainId,
    kind: FeedbackKind,
    feedback: String,
    #[serde(default)]
    action: Option<String>,
    objects: Vec<String>,
    #[serde(default)]
    goal: BTreeMap<String, bool>,
    #[serde(default)]
    preconditions: BTreeMap<String, BTreeMap<String, bool>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelJson {
    literal: String,
    value: bool,
    scene: PerceptionSnapshot,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranslateReply {
    goal: BTreeMap<String, bool>,
}

fn json_block<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, TeacherError> {
    let block = fenced(text, "json").ok_or_else(|| TeacherError::BadResponse("missing ```json block".to_string()))?;
    serde_json::from_str(block).map_err(|e| TeacherError::BadResponse(e.to_string()))
}

fn pscript_block(text: &str) -> Result<Program, TeacherError> {
    let block =
        fenced(text, "pscript").ok_or_else(|| TeacherError::BadResponse("missing ```pscript block".to_string()))?;
    parse_program(block).map_err(TeacherError::Dsl)
}

fn corrected_body(text: &str, pred: &Predicate) -> Result<Expr, TeacherError> {
    let prog = pscript_block(text)?;
    let item = prog
        .items
        .into_iter()
        .find(|i| i.kind == ItemKind::Pred && i.name == pred.name)
        .ok_or_else(|| TeacherError::BadResponse(format!("no `pred {}` in reply", pred.name)))?;
    if item.params != pred.params {
        return Err(TeacherError::BadResponse(format!("parameters of {} changed", pred.name)));
    }
    Ok(item.body)
}

pub struct RemoteTeacher {
    transport: Box<dyn ChatTransport>,
    retries: u32,
    exchanges: Vec<Exchange>,
}

impl RemoteTeacher {
    pub fn new(transport: Box<dyn ChatTransport>, retries: u32) -> Self {
        RemoteTeacher { transport, retries, exchanges: Vec::new() }
    }

    /// `mock:scripted` selects the offline responder; anything else is an
    /// HTTP endpoint.
    pub fn from_config(config: &TeacherBackendConfig) -> Result<Self, TeacherError> {
        let endpoint = config
            .endpoint
            .as_deref()
            .filter(|e| !e.is_empty())
            .ok_or_else(|| TeacherError::Transport("no endpoint configured".to_string()))?;
        let transport: Box<dyn ChatTransport> = if endpoint.starts_with("mock:") {
            Box::new(ScriptedResponder::new(TeacherBackendConfig { endpoint: None, ..config.clone() }))
        } else {
            http_transport(endpoint, config)?
        };
        Ok(RemoteTeacher::new(transport, config.retries))
    }

    fn ask<T>(
        &mut self,
        module: &str,
        prompt: String,
        parse: impl Fn(&str) -> Result<T, TeacherError>,
    ) -> Result<T, TeacherError> {
        let mut messages = vec![ChatMessage::new("system", SYSTEM), ChatMessage::new("user", prompt.clone())];
        let mut last = TeacherError::BadResponse("no attempts".to_string());
        for attempt in 0..=self.retries {
            let response = match self.transport.complete(&messages) {
                Ok(r) => r,
                Err(e) => {
                    self.exchanges.push(Exchange {
                        module: module.to_string(),
                        attempt,
                        prompt: prompt.clone(),
                        response: e.to_string(),
                    });
                    last = e;
                    continue;
                }
            };
            self.exchanges.push(Exchange {
                module: module.to_string(),
                attempt,
                prompt: prompt.clone(),
                response: response.clone(),
            });
            match parse(&response) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    messages.push(ChatMessage::new("assistant", response));
                    messages.push(ChatMessage::new(
                        "user",
                        format!("That reply could not be used ({e}). Answer again in the requested format."),
                    ));
                    last = e;
                }
            }
        }
        Err(last)
    }
}

#[cfg(feature = "remote")]
fn http_transport(endpoint: &str, config: &TeacherBackendConfig) -> Result<Box<dyn ChatTransport>, TeacherError> {
    Ok(Box::new(HttpTransport::new(endpoint, &config.model, config.timeout_secs)))
}

#[cfg(not(feature = "remote"))]
fn http_transport(endpoint: &str, _: &TeacherBackendConfig) -> Result<Box<dyn ChatTransport>, TeacherError> {
    Err(TeacherError::Transport(format!("built without HTTP support, cannot reach {endpoint}")))
}

impl TeacherModules for RemoteTeacher {
    fn reason(&mut self, event: &FeedbackEvent, ctx: &ReasonContext) -> Result<ReasonerOutput, TeacherError> {
        let context = ReasonContextJson {
            domain: ctx.domain,
            kind: event.kind,
            feedback: event.text.clone(),
            action: event.action.as_ref().map(|a| a.to_string()),
            objects: ctx.objects.to_vec(),
            goal: ctx.goal.map(literal_map).unwrap_or_default(),
            preconditions: ledger_map(ctx.ledger),
        };
        let prompt = fill(
            REASON,
            &[
                ("kind", event.kind.as_str()),
                ("feedback", &event.text),
                ("context", &serde_json::to_string_pretty(&context).unwrap_or_default()),
                ("program", &ctx.registry.to_pscript()),
            ],
        );
        let known: Vec<String> = ctx.registry.positive_names();
        self.ask("reason", prompt, |text| {
            let r: ReasonReply = json_block(text)?;
            let new_predicate_descriptions: Vec<PredicateSpec> = r
                .new_predicates
                .into_iter()
                .filter(|s| !known.contains(&s.name) && !s.name.starts_with(NEG_PREFIX))
                .collect();
            let new_action_preconditions = match r.new_preconditions {
                Some(p) if !p.literals.is_empty() => {
                    Some(NewPrecondition { schema: p.schema, literals: literals_from_map(&p.literals)? })
                }
                _ => None,
            };
            Ok(ReasonerOutput {
                new_predicate_descriptions,
                literal_labels: literals_from_map(&r.labels)?,
                new_action_preconditions,
                symbolic_goal: r.symbolic_goal.as_ref().map(literals_from_map).transpose()?,
            })
        })
    }

    fn code(&mut self, specs: &[PredicateSpec], registry: &Registry) -> Result<Program, TeacherError> {
        let context = json!({ "predicates": specs });
        let prompt = fill(
            CODE,
            &[
                ("context", &serde_json::to_string_pretty(&context).unwrap_or_default()),
                ("program", &registry.to_pscript()),
            ],
        );
        let wanted: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        self.ask("code", prompt, |text| {
            let prog = pscript_block(text)?;
            let items: Vec<_> = prog
                .items
                .into_iter()
                .filter(|i| match i.kind {
                    ItemKind::Pred => wanted.contains(&i.name),
                    ItemKind::Util => registry.utility_def(&i.name).is_none(),
                })
                .collect();
            for w in &wanted {
                if !items.iter().any(|i| &i.name == w) {
                    return Err(TeacherError::BadResponse(format!("no definition for `{w}`")));
                }
            }
            Ok(Program { items })
        })
    }

    fn correct_execution(
        &mut self,
        pred: &Predicate,
        registry: &Registry,
        error: &ExecError,
    ) -> Result<Expr, TeacherError> {
        let context = json!({ "name": pred.name, "error": error });
        let prompt = fill(
            CORRECT_EXECUTION,
            &[
                ("name", &pred.name),
                ("error", &error.render().replace('\n', "\n    ")),
                ("context", &serde_json::to_string_pretty(&context).unwrap_or_default()),
                ("program", &registry.to_pscript()),
            ],
        );
        self.ask("correct_execution", prompt, |text| corrected_body(text, pred))
    }

    fn correct_alignment(
        &mut self,
        pred: &Predicate,
        registry: &Registry,
        labels: &[LabeledSnapshot],
    ) -> Result<Expr, TeacherError> {
        let mut relevant: Vec<&LabeledSnapshot> =
            labels.iter().filter(|l| l.literal.atom.predicate == pred.name).collect();
        // disagreeing labels first
        relevant.sort_by_key(|l| {
            let args: Vec<&str> = l.literal.atom.args.iter().map(String::as_str).collect();
            matches!(registry.evaluate(&pred.name, &l.snapshot, &args), Ok(v) if v == l.literal.value)
        });
        relevant.truncate(MAX_PROMPT_LABELS);
        let items: Vec<LabelJson> = relevant
            .iter()
            .map(|l| LabelJson {
                literal: l.literal.atom.to_string(),
                value: l.literal.value,
                scene: l.snapshot.clone(),
            })
            .collect();
        let context = json!({ "name": pred.name, "labels": items });
        let prompt = fill(
            CORRECT_ALIGNMENT,
            &[
                ("name", &pred.name),
                ("context", &serde_json::to_string_pretty(&context).unwrap_or_default()),
                ("program", &registry.to_pscript()),
            ],
        );
        self.ask("correct_alignment", prompt, |text| corrected_body(text, pred))
    }

    fn translate_goal(
        &mut self,
        text: &str,
        registry: &Registry,
        objects: &[String],
    ) -> Result<Vec<Literal>, TeacherError> {
        if text.trim().is_empty() {
            return Err(TeacherError::EmptyGoal);
        }
        let context = json!({ "task": text, "objects": objects });
        let prompt = fill(
            TRANSLATE_GOAL,
            &[
                ("context", &serde_json::to_string_pretty(&context).unwrap_or_default()),
                ("program", &registry.to_pscript()),
            ],
        );
        self.ask("translate_goal", prompt, |reply| {
            let r: TranslateReply = json_block(reply)?;
            let lits = literals_from_map(&r.goal)?;
            if lits.is_empty() {
                return Err(TeacherError::BadResponse("empty goal".to_string()));
            }
            for l in &lits {
                if !registry.contains(&l.atom.predicate) {
                    return Err(TeacherError::BadResponse(format!("unknown predicate `{}`", l.atom.predicate)));
                }
            }
            Ok(lits)
        })
    }

    fn take_exchanges(&mut self) -> Vec<Exchange> {
        std::mem::take(&mut self.exchanges)
    }
}

/// Answers the prompts above by running the scripted backend on the
/// context embedded in them.
pub struct ScriptedResponder {
    inner: ScriptedTeacher,
}

impl ScriptedResponder {
    pub fn new(config: TeacherBackendConfig) -> Self {
        ScriptedResponder { inner: ScriptedTeacher::new(config) }
    }

    fn answer(&mut self, prompt: &str) -> Result<String, TeacherError> {
        let module = prompt
            .lines()
            .find_map(|l| l.strip_prefix("## module: "))
            .ok_or_else(|| TeacherError::BadResponse("prompt names no module".to_string()))?
            .trim()
            .to_string();
        let ctx: serde_json::Value = json_block(prompt)?;
        let registry = Registry::from_pscript(fenced(prompt, "pscript").unwrap_or(""))?;
        let name = ctx.get("name").and_then(|n| n.as_str()).unwrap_or("").to_string();
        let pred =
            || registry.get(&name).cloned().ok_or_else(|| TeacherError::BadResponse(format!("unknown `{name}`")));
        let pred_reply = |p: &Predicate, body: Expr| {
            let mut item = p.to_item();
            item.body = body;
            item.meta.clear();
            format!("```pscript\n{}```\n", print_item(&item))
        };
        let bad = |e: serde_json::Error| TeacherError::BadResponse(e.to_string());
        match module.as_str() {
            "reason" => {
                let c: ReasonContextJson = serde_json::from_value(ctx).map_err(bad)?;
                let mut ledger = PreconditionLedger::new();
                for (schema, lits) in &c.preconditions {
                    for l in literals_from_map(lits)? {
                        ledger.add(schema, l);
                    }
                }
                let goal = literals_from_map(&c.goal)?;
                let action = match &c.action {
                    Some(a) => Some(a.parse::<GroundedAction>().map_err(|e| TeacherError::BadResponse(e.to_string()))?),
                    None => None,
                };
                let event = FeedbackEvent { kind: c.kind, text: c.feedback.clone(), action, step: 0 };
                let rc = ReasonContext {
                    domain: c.domain,
                    objects: &c.objects,
                    registry: &registry,
                    ledger: &ledger,
                    goal: (!goal.is_empty()).then_some(goal.as_slice()),
                };
                let out = self.inner.reason(&event, &rc)?;
                let reply = ReasonReply {
                    new_predicates: out.new_predicate_descriptions,
                    labels: literal_map(&out.literal_labels),
                    new_preconditions: out
                        .new_action_preconditions
                        .map(|p| PreconditionReply { schema: p.schema, literals: literal_map(&p.literals) }),
                    symbolic_goal: out.symbolic_goal.map(|g| literal_map(&g)),
                };
                Ok(format!("```json\n{}\n```\n", serde_json::to_string_pretty(&reply).map_err(bad)?))
            }
            "code" => {
                let specs: Vec<PredicateSpec> = serde_json::from_value(ctx["predicates"].clone()).map_err(bad)?;
                let prog = self.inner.code(&specs, &registry)?;
                Ok(format!("```pscript\n{}```\n", print_program(&prog)))
            }
            "correct_execution" => {
                let p = pred()?;
                let error: ExecError = serde_json::from_value(ctx["error"].clone()).map_err(bad)?;
                let body = self.inner.correct_execution(&p, &registry, &error)?;
                Ok(pred_reply(&p, body))
            }
            "correct_alignment" => {
                let p = pred()?;
                let items: Vec<LabelJson> = serde_json::from_value(ctx["labels"].clone()).map_err(bad)?;
                let mut labels = Vec::new();
                for l in items {
                    let atom: Atom = l.literal.parse()?;
                    labels.push(LabeledSnapshot { snapshot: l.scene, literal: Literal::new(atom, l.value), step: 0 });
                }
                let body = self.inner.correct_alignment(&p, &registry, &labels)?;
                Ok(pred_reply(&p, body))
            }
            "translate_goal" => {
                let task = ctx["task"].as_str().unwrap_or("");
                let objects: Vec<String> = serde_json::from_value(ctx["objects"].clone()).map_err(bad)?;
                let goal = self.inner.translate_goal(task, &registry, &objects)?;
                let reply = TranslateReply { goal: literal_map(&goal) };
                Ok(format!("```json\n{}\n```\n", serde_json::to_string_pretty(&reply).map_err(bad)?))
            }
            other => Err(TeacherError::BadResponse(format!("unknown module `{other}`"))),
        }
    }
}

impl ChatTransport for ScriptedResponder {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, TeacherError> {
        let prompt = messages
            .iter()
            .rev()
            .find(|m| m.role == "user" && m.content.contains("## module: "))
            .ok_or_else(|| TeacherError::BadResponse("no prompt".to_string()))?;
        Ok(self.answer(&prompt.content).unwrap_or_else(|e| format!("I could not answer: {e}")))
    }
}
