//! Per-attribute extraction accuracy against annotated abstracts.

use serde::Serialize;

use super::{ExtractionError, Layer};
use crate::model::{AccidentAbstract, ParticipantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Attribute {
    Weather,
    Lighting,
    LaneNum,
    SpeedLimit,
    CollisionLocation,
    DrivingActions,
    CrashType,
    DrivingDirections,
    RunningLanes,
    ParticipantsNumber,
}

impl Attribute {
    /// Report order: environment, road network, dynamic objects.
    pub const ALL: [Attribute; 10] = [
        Attribute::Weather,
        Attribute::Lighting,
        Attribute::LaneNum,
        Attribute::SpeedLimit,
        Attribute::CollisionLocation,
        Attribute::DrivingActions,
        Attribute::CrashType,
        Attribute::DrivingDirections,
        Attribute::RunningLanes,
        Attribute::ParticipantsNumber,
    ];

    pub fn layer(self) -> Layer {
        match self {
            Attribute::Weather | Attribute::Lighting => Layer::Environment,
            Attribute::LaneNum | Attribute::SpeedLimit | Attribute::CollisionLocation => Layer::RoadNetwork,
            _ => Layer::DynamicObjects,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Weather => "Weather",
            Attribute::Lighting => "Lighting",
            Attribute::LaneNum => "LaneNum",
            Attribute::SpeedLimit => "SpeedLimit",
            Attribute::CollisionLocation => "CollisionLocation",
            Attribute::DrivingActions => "DrivingActions",
            Attribute::CrashType => "CrashType",
            Attribute::DrivingDirections => "DrivingDirections",
            Attribute::RunningLanes => "RunningLanes",
            Attribute::ParticipantsNumber => "ParticipantsNumber",
        }
    }

    /// Score of one prediction in `[0, 1]`.
    fn score(self, pred: &AccidentAbstract, gold: &AccidentAbstract) -> f64 {
        let exact = |b: bool| if b { 1.0 } else { 0.0 };
        let per_participant = |f: &dyn Fn(&ParticipantSpec, &ParticipantSpec) -> bool| {
            if gold.participants.is_empty() {
                return 1.0;
            }
            let hits = gold
                .participants
                .iter()
                .filter(|g| pred.participant(&g.id).is_some_and(|p| f(p, g)))
                .count();
            hits as f64 / gold.participants.len() as f64
        };
        match self {
            Attribute::Weather => exact(pred.weather == gold.weather),
            Attribute::Lighting => exact(pred.lighting == gold.lighting),
            Attribute::LaneNum => exact(pred.lane_num == gold.lane_num),
            Attribute::SpeedLimit => exact((pred.speed_limit - gold.speed_limit).abs() <= 1e-6),
            Attribute::CollisionLocation => exact(pred.collision_location == gold.collision_location),
            Attribute::CrashType => exact(pred.crash.crash_type == gold.crash.crash_type),
            Attribute::ParticipantsNumber => exact(pred.participants.len() == gold.participants.len()),
            Attribute::DrivingActions => per_participant(&|p, g| p.actions == g.actions),
            Attribute::DrivingDirections => per_participant(&|p, g| p.driving_direction == g.driving_direction),
            Attribute::RunningLanes => per_participant(&|p, g| p.running_lane == g.running_lane),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub layer: Layer,
    pub attribute: Attribute,
    pub reports: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyTable {
    pub fn get(&self, attribute: Attribute) -> Option<f64> {
        self.rows.iter().find(|r| r.attribute == attribute).map(|r| r.accuracy)
    }

    /// Mean accuracy of the attributes of `layer`.
    pub fn layer_average(&self, layer: Layer) -> f64 {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.layer == layer).map(|r| r.accuracy).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// CSV grouped by layer, each group closed by its average.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,attribute,reports,accuracy_percent\n");
        for layer in Layer::ALL {
            let mut reports = 0;
            for r in self.rows.iter().filter(|r| r.layer == layer) {
                reports = r.reports;
                s.push_str(&format!("{},{},{},{:.2}\n", layer.label(), r.attribute.name(), r.reports, r.accuracy * 100.0));
            }
            s.push_str(&format!("{},Average,{},{:.2}\n", layer.label(), reports, self.layer_average(layer) * 100.0));
        }
        s
    }
}

/// Fraction of exact matches per attribute. List-valued attributes score
/// the share of gold participants matched in each report, averaged over
/// reports.
pub fn evaluate_accuracy(
    predictions: &[AccidentAbstract],
    gold: &[AccidentAbstract],
) -> Result<AccuracyTable, ExtractionError> {
    if predictions.len() != gold.len() {
        return Err(ExtractionError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    let n = gold.len();
    let rows = Attribute::ALL
        .iter()
        .map(|&a| {
            let total: f64 = predictions.iter().zip(gold).map(|(p, g)| a.score(p, g)).sum();
            AccuracyRow {
                layer: a.layer(),
                attribute: a,
                reports: n,
                accuracy: if n == 0 { 1.0 } else { total / n as f64 },
            }
        })
        .collect();
    Ok(AccuracyTable { rows })
}
