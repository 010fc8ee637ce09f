mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::Duration;
use common::{config, form, platform, post_id, t0};
use crowdlabel_core::annotation::{
    AnnotationError, AssignmentState, DemographicsForm, GoldConfig, JudgmentInput, RoundState,
};
use crowdlabel_core::scheme::Label;
use crowdlabel_service::lock::DataDirLock;
use crowdlabel_service::store::DB_FILE;
use crowdlabel_service::{ManualClock, Platform, ServiceError, Settings};
use tempfile::TempDir;

fn demographics() -> DemographicsForm {
    serde_json::from_value(form()).unwrap()
}

fn ready(p: &mut Platform) -> String {
    let reg = p.register(&demographics()).unwrap();
    p.acknowledge(&reg.worker_id, Some(&reg.token)).unwrap();
    reg.token
}

fn inputs(post_ids: &[String], label: &str) -> Vec<JudgmentInput> {
    post_ids
        .iter()
        .map(|p| JudgmentInput {
            post_id: p.clone(),
            top_label: Label::from(label),
            sub_labels: vec![],
            other_text: None,
        })
        .collect()
}

fn judgment_rows(dir: &TempDir) -> (i64, i64) {
    let conn = rusqlite::Connection::open(dir.path().join(DB_FILE)).unwrap();
    let j = conn
        .query_row("SELECT COUNT(*) FROM judgments", [], |r| r.get(0))
        .unwrap();
    let l = conn
        .query_row("SELECT COUNT(*) FROM judgment_labels", [], |r| r.get(0))
        .unwrap();
    (j, l)
}

#[test]
fn restart_restores_equivalent_state() {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let (tokens, open, before) = {
        let mut p = platform(
            dir.path(),
            clock.clone(),
            Settings::default(),
            30,
            config("r1", "L", 2, 3, 10),
        );
        let tokens: Vec<String> = (0..3).map(|_| ready(&mut p)).collect();
        for t in &tokens[..2] {
            let b = p.next_batch("r1", Some(t)).unwrap().unwrap();
            let ids: Vec<String> = b.posts.iter().map(|x| x.post_id.clone()).collect();
            p.submit("r1", Some(t), b.assignment_id, inputs(&ids, "Spam"))
                .unwrap();
        }
        let open = p.next_batch("r1", Some(&tokens[2])).unwrap().unwrap();
        let r = p.round("r1").unwrap();
        (
            tokens,
            open,
            (
                r.progress(),
                r.ledger().to_vec(),
                r.assignments().cloned().collect::<Vec<_>>(),
            ),
        )
    };

    let mut p = Platform::open_dir(dir.path(), clock.clone(), Settings::default()).unwrap();
    let r = p.round("r1").unwrap();
    assert_eq!(r.progress(), before.0);
    assert_eq!(r.ledger(), &before.1[..]);
    assert_eq!(r.assignments().cloned().collect::<Vec<_>>(), before.2);
    assert!(
        p.authenticate(Some(&tokens[0]))
            .unwrap()
            .definitions_acknowledged
    );

    // the outstanding reservation survives and can still be submitted
    let ids: Vec<String> = open.posts.iter().map(|x| x.post_id.clone()).collect();
    let report = p
        .submit(
            "r1",
            Some(&tokens[2]),
            open.assignment_id,
            inputs(&ids, "Normal"),
        )
        .unwrap();
    assert_eq!(report.accepted, 10);

    // new workers continue the id sequence
    let reg = p.register(&demographics()).unwrap();
    assert_eq!(reg.worker_id, "w000004");
}

#[test]
fn expired_reservations_reload_released() {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let (token, assignment) = {
        let mut p = platform(
            dir.path(),
            clock.clone(),
            Settings::default(),
            10,
            config("r1", "L", 1, 1, 10),
        );
        let token = ready(&mut p);
        let b = p.next_batch("r1", Some(&token)).unwrap().unwrap();
        (token, b.assignment_id)
    };
    // expiry happens while the service is down
    clock.advance(Duration::minutes(16));
    let mut p = Platform::open_dir(dir.path(), clock.clone(), Settings::default()).unwrap();
    let err = p
        .submit(
            "r1",
            Some(&token),
            assignment,
            inputs(&[post_id(0)], "Normal"),
        )
        .unwrap_err();
    assert!(
        matches!(err, ServiceError::Annotation(AnnotationError::Expired(_))),
        "{err}"
    );
    let again = p.next_batch("r1", Some(&token)).unwrap().unwrap();
    assert_eq!(again.posts.len(), 10);

    drop(p);
    let p = Platform::open_dir(dir.path(), clock, Settings::default()).unwrap();
    let states: Vec<AssignmentState> = p
        .round("r1")
        .unwrap()
        .assignments()
        .map(|a| a.state)
        .collect();
    assert_eq!(
        states,
        vec![AssignmentState::Expired, AssignmentState::Reserved]
    );
}

#[test]
fn failed_validation_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let mut p = platform(
        dir.path(),
        clock,
        Settings::default(),
        10,
        config("r1", "L", 1, 1, 10),
    );
    let token = ready(&mut p);
    let b = p.next_batch("r1", Some(&token)).unwrap().unwrap();
    let ids: Vec<String> = b.posts.iter().map(|x| x.post_id.clone()).collect();
    let mut bad = inputs(&ids, "Normal");
    bad[9].top_label = Label::inappropriate();
    assert!(p.submit("r1", Some(&token), b.assignment_id, bad).is_err());
    assert_eq!(judgment_rows(&dir), (0, 0));
    assert_eq!(p.round("r1").unwrap().ledger().len(), 0);
}

#[test]
fn failed_write_leaves_no_partial_rows_and_memory_untouched() {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let mut p = platform(
        dir.path(),
        clock,
        Settings::default(),
        10,
        config("r1", "L", 1, 1, 10),
    );
    let token = ready(&mut p);
    let b = p.next_batch("r1", Some(&token)).unwrap().unwrap();
    let ids: Vec<String> = b.posts.iter().map(|x| x.post_id.clone()).collect();
    let mut judged = inputs(&ids, "Normal");
    judged[9] = JudgmentInput {
        post_id: ids[9].clone(),
        top_label: Label::inappropriate(),
        sub_labels: vec![Label::from("Hateful")],
        other_text: None,
    };

    // make the label insert fail after the judgment rows went in
    let side = rusqlite::Connection::open(dir.path().join(DB_FILE)).unwrap();
    side.execute_batch(
        "CREATE TRIGGER fail_labels BEFORE INSERT ON judgment_labels
         BEGIN SELECT RAISE(ABORT, 'injected'); END;",
    )
    .unwrap();
    let err = p
        .submit("r1", Some(&token), b.assignment_id, judged.clone())
        .unwrap_err();
    assert!(matches!(err, ServiceError::Db(_)), "{err}");
    assert_eq!(judgment_rows(&dir), (0, 0));
    let r = p.round("r1").unwrap();
    assert_eq!(r.ledger().len(), 0);
    assert_eq!(r.state(), RoundState::Open);
    assert_eq!(
        r.assignment(b.assignment_id).unwrap().state,
        AssignmentState::Reserved
    );

    side.execute_batch("DROP TRIGGER fail_labels").unwrap();
    let report = p
        .submit("r1", Some(&token), b.assignment_id, judged)
        .unwrap();
    assert_eq!(report.accepted, 10);
    assert_eq!(report.round_state, RoundState::Closed);
    assert_eq!(judgment_rows(&dir), (10, 1));
}

#[test]
fn failed_registration_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let mut p = platform(
        dir.path(),
        clock,
        Settings::default(),
        1,
        config("r1", "L", 1, 1, 10),
    );
    let mut f = demographics();
    f.education_level = Some("kindergarten".into());
    assert!(p.register(&f).is_err());
    assert!(p.store().workers().unwrap().is_empty());
    assert!(p.store().sessions().unwrap().is_empty());
}

#[test]
fn data_dir_lock_is_exclusive() {
    let dir = TempDir::new().unwrap();
    let first = DataDirLock::acquire(dir.path()).unwrap();
    assert!(matches!(
        DataDirLock::acquire(dir.path()),
        Err(ServiceError::Locked(_))
    ));
    drop(first);
    DataDirLock::acquire(dir.path()).unwrap();
}

#[test]
fn gold_exclusion_and_quarantine_persist() {
    let dir = TempDir::new().unwrap();
    let clock = Arc::new(ManualClock::new(t0()));
    let mut cfg = config("r1", "L''", 2, 2, 10);
    cfg.gold = Some(GoldConfig {
        labels: (0..10)
            .map(|i| (post_id(i), Label::normal()))
            .collect::<BTreeMap<_, _>>(),
        min_answers: 3,
        min_accuracy: 0.7,
    });
    let token = {
        let mut p = platform(dir.path(), clock.clone(), Settings::default(), 10, cfg);
        let token = ready(&mut p);
        let b = p.next_batch("r1", Some(&token)).unwrap().unwrap();
        let ids: Vec<String> = b.posts.iter().map(|x| x.post_id.clone()).collect();
        let report = p
            .submit("r1", Some(&token), b.assignment_id, inputs(&ids, "Spam"))
            .unwrap();
        assert!(report.worker_excluded);
        assert_eq!(report.quarantined, 10);
        token
    };
    let mut p = Platform::open_dir(dir.path(), clock, Settings::default()).unwrap();
    let err = p.next_batch("r1", Some(&token)).unwrap_err();
    assert!(
        matches!(
            err,
            ServiceError::Annotation(AnnotationError::WorkerExcluded(_))
        ),
        "{err}"
    );
    assert_eq!(p.round("r1").unwrap().accepted_judgments().count(), 0);
    assert_eq!(p.round("r1").unwrap().progress().quarantined_judgments, 10);
    assert!(p
        .store()
        .judgments("r1")
        .unwrap()
        .iter()
        .all(|j| j.quarantined));
}
