mod common;

use std::process::Child;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use common::chat::{example_server, options, run_until, spawn_bot, FakeChat, TOKEN, WAIT};
use kic::bot::{
    cap_reply, poll_loop, BotApiClient, BotDeps, BotError, FileStore, NoExamples, ProfileStore, StoreFile,
    MAX_REPLY_CHARS,
};
use kic::generation::StubBackend;
use proptest::prelude::*;

fn words(store: &FileStore, chat_id: i64) -> Vec<String> {
    store.load(chat_id).unwrap().map(|p| p.saved_words.into_iter().map(|w| w.word).collect()).unwrap_or_default()
}

#[test]
fn word_list_forget_flow() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path().join("store.json")).unwrap();
    let chat = FakeChat::start(TOKEN);
    chat.push(1, 77, "/word cat");
    chat.push(2, 77, "/list");
    chat.push(3, 77, "/forget cat");
    chat.push(4, 77, "/list");
    let sent = run_until(&chat, &store, 4);
    assert_eq!(sent.len(), 4);
    assert!(sent.iter().all(|s| s.chat_id == 77));
    assert!(sent[0].text.contains(&StubBackend::sentence("cat", 0)), "{}", sent[0].text);
    assert!(sent[0].text.contains("Saved \"cat\""));
    assert!(sent[1].text.contains("1. cat"));
    assert!(sent[2].text.contains("Removed \"cat\""));
    assert!(sent[3].text.contains("empty"));
    assert!(words(&store, 77).is_empty());
}

#[test]
fn cursor_advances_past_each_update() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let store = FileStore::open(&path).unwrap();
    let chat = FakeChat::start(TOKEN);
    for (id, text) in [(1, "/word sun"), (2, "/word moon"), (3, "/start")] {
        chat.push(id, 5, text);
    }
    assert_eq!(run_until(&chat, &store, 3).len(), 3);
    let on_disk: StoreFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(on_disk.cursor, 4);
    assert_eq!(FileStore::open(&path).unwrap().cursor().unwrap(), 4);
}

#[test]
fn duplicate_delivery_saves_once() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path().join("store.json")).unwrap();
    let chat = FakeChat::start(TOKEN);
    chat.push(1, 9, "/word tree");
    chat.push(1, 9, "/word tree");
    chat.push(2, 9, "/word Tree");
    run_until(&chat, &store, 2);
    assert_eq!(words(&store, 9), ["tree"]);
}

#[test]
fn chats_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path().join("store.json")).unwrap();
    let chat = FakeChat::start(TOKEN);
    let script = [(1, "/word apple"), (2, "/word pear"), (1, "/word plum"), (2, "/forget apple"), (2, "/list"), (1, "/list")];
    for (i, (chat_id, text)) in script.iter().enumerate() {
        chat.push(i as i64 + 1, *chat_id, text);
    }
    let sent = run_until(&chat, &store, script.len());
    assert_eq!(words(&store, 1), ["apple", "plum"]);
    assert_eq!(words(&store, 2), ["pear"]);
    assert!(sent[3].text.contains("not in your list"));
    assert!(sent[4].text.contains("1. pear") && !sent[4].text.contains("apple"));
    assert!(sent[5].text.contains("1. apple") && sent[5].text.contains("2. plum"));
}

#[test]
fn transient_send_failure_redelivers() {
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path().join("store.json")).unwrap();
    let failed = Arc::new(Mutex::new(false));
    let f = failed.clone();
    let chat = FakeChat::with_hook(
        TOKEN,
        Box::new(move |_, _| {
            let mut f = f.lock().unwrap();
            (!std::mem::replace(&mut *f, true)).then_some(502)
        }),
    );
    chat.push(1, 3, "/word rain");
    let sent = run_until(&chat, &store, 1);
    assert_eq!(sent.len(), 1);
    // The save happened before the failed send, so the retry finds it saved.
    assert!(sent[0].text.contains("\"rain\" is already in your list"), "{}", sent[0].text);
    assert_eq!(words(&store, 3), ["rain"]);
}

#[test]
fn bad_token_is_fatal() {
    let server = FakeChat::unauthorized();
    let dir = tempfile::tempdir().unwrap();
    let store = FileStore::open(dir.path().join("store.json")).unwrap();
    let client = BotApiClient::new(&server.base, TOKEN, Duration::ZERO).unwrap();
    let deps = BotDeps { backend: &StubBackend, examples: &NoExamples, store: &store };
    let err = poll_loop(&client, &deps, &options(), &AtomicBool::new(false)).unwrap_err();
    assert!(matches!(err, BotError::Auth(401)));
}

#[test]
fn binary_exits_3_on_bad_token() {
    let server = FakeChat::unauthorized();
    let dir = tempfile::tempdir().unwrap();
    let mut child = spawn_bot(&server.base, &dir.path().join("s.json"), "http://127.0.0.1:9");
    assert_eq!(child.wait().unwrap().code(), Some(3));
}

#[test]
fn kill_and_restart_mid_update() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.json");
    let examples = example_server();
    let child: Arc<Mutex<Option<Child>>> = Arc::new(Mutex::new(None));
    let killed = Arc::new(AtomicBool::new(false));
    let (c, k) = (child.clone(), killed.clone());
    // The first reply about "dog" kills the bot before it is acknowledged.
    let chat = FakeChat::with_hook(
        TOKEN,
        Box::new(move |sent, _| {
            if sent.text.contains("\"dog\"") && !k.swap(true, Ordering::SeqCst) {
                if let Some(mut ch) = c.lock().unwrap().take() {
                    ch.kill().unwrap();
                    ch.wait().unwrap();
                }
                return Some(500);
            }
            None
        }),
    );
    chat.push(10, 42, "/word cat");
    chat.push(11, 42, "/word dog");
    chat.push(12, 42, "/list");

    *child.lock().unwrap() = Some(spawn_bot(&chat.server.base, &store_path, &examples.base));
    let deadline = std::time::Instant::now() + WAIT;
    while !killed.load(Ordering::SeqCst) && std::time::Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(10));
    }
    assert!(killed.load(Ordering::SeqCst), "bot never replied about dog");
    let mid: StoreFile = serde_json::from_str(&std::fs::read_to_string(&store_path).unwrap()).unwrap();
    assert_eq!(mid.cursor, 11, "only the cat update is acknowledged");

    let mut restarted = spawn_bot(&chat.server.base, &store_path, &examples.base);
    let sent = chat.wait_for(3, WAIT);
    let _ = restarted.kill();
    let _ = restarted.wait();

    assert_eq!(sent.len(), 3, "{sent:?}");
    assert!(sent[0].text.contains("Saved \"cat\""));
    assert!(sent[0].text.contains("From real texts:"));
    assert!(sent[1].text.contains("\"dog\" is already in your list"), "{}", sent[1].text);
    assert!(sent[2].text.contains("1. cat\n2. dog"), "{}", sent[2].text);
    let end: StoreFile = serde_json::from_str(&std::fs::read_to_string(&store_path).unwrap()).unwrap();
    let saved: Vec<&str> = end.profiles[&42].saved_words.iter().map(|w| w.word.as_str()).collect();
    assert_eq!(saved, ["cat", "dog"]);
}

proptest! {
    #[test]
    fn replies_respect_the_cap(parts in prop::collection::vec("[a-z ]{1,200}[.!?]?\n?", 0..60)) {
        let text: String = parts.concat();
        let capped = cap_reply(&text);
        prop_assert!(capped.chars().count() <= MAX_REPLY_CHARS);
        prop_assert!(text.starts_with(&capped));
        if text.chars().count() <= MAX_REPLY_CHARS {
            prop_assert_eq!(&capped, &text);
        }
    }
}
