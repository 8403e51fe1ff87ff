use crashsynth::extraction::{
    build_prompt, evaluate_accuracy, extract_abstract, extract_layer, load_reports, mock_from_reports, Attribute,
    ClientError, ExtractionError, Layer, PromptPattern, RetryPolicy, ScriptedClient,
};
use crashsynth::fixtures::reports_dir;
use crashsynth::model::{Lighting, Weather};

#[test]
fn mock_reproduces_every_gold_abstract() {
    let reports = load_reports(&reports_dir()).unwrap();
    assert!(reports.len() >= 4);
    let mock = mock_from_reports(&reports);
    let mut preds = Vec::new();
    let mut gold = Vec::new();
    for r in &reports {
        let a = extract_abstract(&mock, &r.report_text, &RetryPolicy::immediate()).unwrap();
        assert_eq!(Some(&a), r.ground_truth.as_ref(), "{}", r.name);
        preds.push(a);
        gold.push(r.ground_truth.clone().unwrap());
    }
    let table = evaluate_accuracy(&preds, &gold).unwrap();
    for a in Attribute::ALL {
        assert_eq!(table.get(a), Some(1.0), "{a:?}");
    }
}

#[test]
fn three_of_four_weather_scores_three_quarters() {
    let reports = load_reports(&reports_dir()).unwrap();
    let gold: Vec<_> = reports.iter().take(4).map(|r| r.ground_truth.clone().unwrap()).collect();
    let mut preds = gold.clone();
    preds[2].weather = if gold[2].weather == Weather::Foggy { Weather::Clear } else { Weather::Foggy };
    let table = evaluate_accuracy(&preds, &gold).unwrap();
    assert_eq!(table.get(Attribute::Weather), Some(0.75));
    assert_eq!(table.get(Attribute::Lighting), Some(1.0));
    assert!(matches!(
        evaluate_accuracy(&preds[..3], &gold),
        Err(ExtractionError::LengthMismatch { predictions: 3, gold: 4 })
    ));
}

#[test]
fn one_wrong_participant_halves_list_attributes() {
    let reports = load_reports(&reports_dir()).unwrap();
    let gold = vec![reports[0].ground_truth.clone().unwrap()];
    let mut pred = gold.clone();
    pred[0].participants[1].running_lane += 1;
    let table = evaluate_accuracy(&pred, &gold).unwrap();
    assert_eq!(table.get(Attribute::RunningLanes), Some(0.5));
    assert_eq!(table.get(Attribute::DrivingActions), Some(1.0));
}

#[test]
fn accuracy_csv_groups_attributes_by_layer() {
    let reports = load_reports(&reports_dir()).unwrap();
    let gold: Vec<_> = reports.iter().map(|r| r.ground_truth.clone().unwrap()).collect();
    let csv = evaluate_accuracy(&gold, &gold).unwrap().to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "layer,attribute,reports,accuracy_percent");
    assert_eq!(lines.len(), 1 + 10 + 3);
    assert!(lines[1].starts_with("Environment conditions,Weather,"));
    assert!(lines[3].starts_with("Environment conditions,Average,"));
    assert!(lines[13].starts_with("Dynamic objects,Average,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",100.00")));
}

#[test]
fn prompts_name_their_layer_tags_first() {
    let env = build_prompt(&PromptPattern::standard(Layer::Environment), "Some report.").unwrap();
    let first = env.lines().next().unwrap();
    assert!(first.contains("<Weather>") && first.contains("<Lighting>"));
    let dynamic = build_prompt(&PromptPattern::standard(Layer::DynamicObjects), "Some report.").unwrap();
    let first = dynamic.lines().next().unwrap();
    for tag in Layer::DynamicObjects.tags() {
        assert!(first.contains(&format!("<{tag}>")), "{tag}");
    }
    let rules = dynamic.find("intended action must not be added").unwrap();
    let examples = dynamic.find("Examples:").unwrap();
    let report = dynamic.rfind("Some report.").unwrap();
    assert!(dynamic.find("Attributes:").unwrap() < rules && rules < examples && examples < report);
    assert_eq!(dynamic, build_prompt(&PromptPattern::standard(Layer::DynamicObjects), "Some report.").unwrap());
    assert_eq!(
        build_prompt(&PromptPattern::standard(Layer::Environment), "  \n"),
        Err(ExtractionError::EmptyReport)
    );
}

#[test]
fn canned_environment_answer_is_parsed() {
    let client = ScriptedClient::new(vec![Ok("<Weather>Cloudy</Weather>\n<Lighting>Dark</Lighting>".into())]);
    let p = extract_layer(&client, &PromptPattern::standard(Layer::Environment), "r", &RetryPolicy::immediate()).unwrap();
    assert_eq!(p.weather, Some(Weather::Cloudy));
    assert_eq!(p.lighting, Some(Lighting::Dark));
}

#[test]
fn empty_tags_leave_every_field_missing() {
    let client = ScriptedClient::new(vec![Ok("<Weather></Weather><Lighting></Lighting>".into())]);
    let p = extract_layer(&client, &PromptPattern::standard(Layer::Environment), "r", &RetryPolicy::immediate()).unwrap();
    assert_eq!((p.weather, p.lighting), (None, None));
}

#[test]
fn malformed_twice_is_a_parse_error_after_one_reprompt() {
    let client = ScriptedClient::new(vec![Ok("sunny, I think".into()), Ok("still no tags".into())]);
    let err = extract_layer(&client, &PromptPattern::standard(Layer::Environment), "r", &RetryPolicy::immediate());
    assert!(matches!(err, Err(ExtractionError::Parse { layer: Layer::Environment, .. })));
    assert_eq!(client.calls().len(), 2);
}

#[test]
fn malformed_then_tagged_recovers() {
    let client = ScriptedClient::new(vec![Ok("sunny".into()), Ok("<Weather>clear</Weather>".into())]);
    let p = extract_layer(&client, &PromptPattern::standard(Layer::Environment), "r", &RetryPolicy::immediate()).unwrap();
    assert_eq!(p.weather, Some(Weather::Clear));
}

#[test]
fn transport_failures_are_retried_three_times() {
    let fail = || Err(ClientError::Transport("connection reset".into()));
    let client = ScriptedClient::new(vec![fail(), fail(), fail(), fail()]);
    let err = extract_layer(&client, &PromptPattern::standard(Layer::Environment), "r", &RetryPolicy::immediate());
    assert!(matches!(err, Err(ExtractionError::Client { attempts: 4, .. })));

    let client = ScriptedClient::new(vec![fail(), fail(), Ok("<Weather>rainy</Weather>".into())]);
    let p = extract_layer(&client, &PromptPattern::standard(Layer::Environment), "r", &RetryPolicy::immediate()).unwrap();
    assert_eq!(p.weather, Some(Weather::Rainy));
}

#[test]
fn missing_weather_defaults_to_clear() {
    let client = ScriptedClient::new(vec![
        Ok("<Weather></Weather><Lighting>daylight</Lighting>".into()),
        Ok("<CollisionLocation>straight road</CollisionLocation><LaneNum>2</LaneNum><SpeedLimit>45 mph</SpeedLimit>".into()),
        Ok(concat!(
            "<ParticipantsNumber>2</ParticipantsNumber><CrashType>rear-end</CrashType>",
            "<DrivingDirections>[\"V1:eastbound\",\"V2:eastbound\"]</DrivingDirections>",
            "<RunningLanes>[\"V1:1\",\"V2:1\"]</RunningLanes>",
            "<DrivingActions>[\"V1:[follow lane]\",\"V2:[stop]\"]</DrivingActions>"
        )
        .into()),
    ]);
    let a = extract_abstract(&client, "V1 rear-ended V2.", &RetryPolicy::immediate()).unwrap();
    assert_eq!(a.weather, Weather::Clear);
    assert_eq!(a.crash.striker_id, "V1");
    assert_eq!(a.participants.len(), 2);
}
