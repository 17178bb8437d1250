//! Slice-by-slice propagation of a segmentation through a volume.
//!
//! A session starts from a user-drawn template on one slice and always holds
//! one cut under review. Accepting it stores the contour and moves to a new
//! slice beyond the segmented range, in the requested direction; the stored
//! contour at that end of the range, scaled by `sf` about its centroid,
//! becomes the new template and its centroid the new seed. User-drawn
//! templates are used as drawn.
//!
//! Every mutating call is appended to an event log that replays the session
//! deterministically.

use crate::contour_set::{write_contour_set, ContourSet, Provenance, SliceContour};
use crate::error::{Error, Result};
use crate::graph_cut::{CutResult, GraphParams, SliceSegmentation};
use crate::interpolate::interpolate_gaps;
use crate::nrrd::write_mask_nrrd;
use crate::point::{signed_area, Point2};
use crate::raster::voxelize_contours;
use crate::template::{centroid, scale_template, SeedPoint, Template};
use crate::volume::{MaskVolume, Volume3D};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

/// Cuts enclosing less than this many square pixels cannot seed the next slice.
pub const MIN_CUT_AREA: f64 = 2.0;

/// Propagation direction along z; serialized as `1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Direction {
    Up,
    Down,
}

impl From<Direction> for i8 {
    fn from(d: Direction) -> i8 {
        match d {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

impl TryFrom<i8> for Direction {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Direction::Up),
            -1 => Ok(Direction::Down),
            other => Err(format!("direction must be 1 or -1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    /// A cut is waiting to be accepted or redrawn.
    Reviewing,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Start {
        z0: usize,
        template: Vec<Point2>,
        seed: Point2,
        params: GraphParams,
    },
    AcceptAndAdvance {
        direction: Direction,
        skip: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<GraphParams>,
    },
    Redraw {
        template: Vec<Point2>,
        seed: Point2,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<GraphParams>,
    },
    Interpolate,
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub at_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Replay file: the ordered events of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayLog {
    #[serde(default)]
    pub object: String,
    pub events: Vec<SessionEvent>,
}

impl ReplayLog {
    pub fn from_kinds(object: impl Into<String>, kinds: Vec<EventKind>) -> Self {
        Self {
            object: object.into(),
            events: kinds.into_iter().map(|kind| SessionEvent { at_ms: 0, kind }).collect(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("replay log serializes")
    }

    /// Wall time between the first and the last event.
    pub fn elapsed_ms(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.at_ms.saturating_sub(a.at_ms),
            _ => 0,
        }
    }
}

/// The slice under review.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSlice {
    pub z: usize,
    pub template: Template,
    pub seed: SeedPoint,
    pub basis: Provenance,
    pub segmentation: SliceSegmentation,
}

/// Serializable view of a session for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub object: String,
    pub status: Status,
    pub params: GraphParams,
    pub current_z: Option<usize>,
    pub current_template: Option<Vec<Point2>>,
    pub current_seed: Option<Point2>,
    pub current_cut: Option<CutResult>,
    pub contours: ContourSet,
    pub gaps: Vec<usize>,
    pub elapsed_ms: u64,
    pub events: usize,
}

/// Slices filled in by interpolation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub interpolated: Vec<usize>,
    pub segmented: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Session {
    volume: Arc<Volume3D>,
    object: String,
    params: GraphParams,
    accepted: BTreeMap<usize, SliceContour>,
    interpolated: BTreeMap<usize, Vec<Point2>>,
    current: Option<CurrentSlice>,
    status: Status,
    log: Vec<SessionEvent>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    pub fn start(
        volume: Arc<Volume3D>,
        object: impl Into<String>,
        z0: usize,
        template: Vec<Point2>,
        seed: Point2,
        params: GraphParams,
    ) -> Result<Self> {
        params.validate()?;
        volume.grid().check_z(z0 as i64)?;
        let current = segment_user_template(&volume, z0, template.clone(), seed, &params)?;
        let mut session = Self {
            volume,
            object: object.into(),
            params,
            accepted: BTreeMap::new(),
            interpolated: BTreeMap::new(),
            current: Some(current),
            status: Status::Reviewing,
            log: Vec::new(),
        };
        session.record(EventKind::Start {
            z0,
            template,
            seed,
            params,
        });
        Ok(session)
    }

    /// Re-executes a replay log against `volume`. `params`, when given,
    /// replaces every parameter set recorded in the log.
    pub fn replay(volume: Arc<Volume3D>, log: &ReplayLog, params: Option<GraphParams>) -> Result<Self> {
        let mut events = log.events.iter();
        let Some(SessionEvent {
            kind:
                EventKind::Start {
                    z0,
                    template,
                    seed,
                    params: p0,
                },
            ..
        }) = events.next()
        else {
            return Err(Error::State("replay log must begin with a start event".into()));
        };
        let mut session = Session::start(
            volume,
            log.object.clone(),
            *z0,
            template.clone(),
            *seed,
            params.unwrap_or(*p0),
        )?;
        for event in events {
            match &event.kind {
                EventKind::Start { .. } => return Err(Error::State("second start event in replay log".into())),
                EventKind::AcceptAndAdvance {
                    direction,
                    skip,
                    params: p,
                } => {
                    session.accept_and_advance(*direction, *skip, params.or(*p))?;
                }
                EventKind::Redraw {
                    template,
                    seed,
                    params: p,
                } => {
                    session.redraw(template.clone(), *seed, params.or(*p))?;
                }
                EventKind::Interpolate => {
                    session.interpolate_missing()?;
                }
                EventKind::Finalize => {
                    session.finalize()?;
                }
            }
        }
        Ok(session)
    }

    pub fn volume(&self) -> &Arc<Volume3D> {
        &self.volume
    }

    pub fn object(&self) -> &str {
        &self.object
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn current(&self) -> Option<&CurrentSlice> {
        self.current.as_ref()
    }

    pub fn replay_log(&self) -> ReplayLog {
        ReplayLog {
            object: self.object.clone(),
            events: self.log.clone(),
        }
    }

    /// Stores the cut under review and segments the next slice `skip` slices
    /// beyond the segmented range in `direction`.
    pub fn accept_and_advance(
        &mut self,
        direction: Direction,
        skip: usize,
        params: Option<GraphParams>,
    ) -> Result<&SliceSegmentation> {
        let current = self.reviewing()?;
        if skip == 0 {
            return Err(Error::arg("skip must be >= 1"));
        }
        let params = params.unwrap_or(self.params);
        params.validate()?;
        let area = signed_area(&current.segmentation.cut.contour).abs();
        if area < MIN_CUT_AREA {
            return Err(Error::DegenerateCut { z: current.z, area });
        }
        let accepted = SliceContour {
            z: current.z,
            provenance: current.basis,
            vertices: current.segmentation.cut.contour.clone(),
        };

        let (lo, hi) = self.segmented_range_with(current.z);
        let (from, target) = match direction {
            Direction::Up => (hi, hi as i64 + skip as i64),
            Direction::Down => (lo, lo as i64 - skip as i64),
        };
        let target = self.volume.grid().check_z(target)?;
        let source = if from == current.z {
            &accepted.vertices
        } else {
            &self.accepted[&from].vertices
        };

        let center = centroid(source)?;
        let template = scale_template(&Template::new(source.clone(), target)?, params.sf, center)?;
        let seed = SeedPoint {
            position: center,
            z_index: target,
        };
        let slice = self.volume.extract_slice(target)?;
        let segmentation = SliceSegmentation::run(&slice, &template, seed, &params)?;

        self.accepted.insert(accepted.z, accepted);
        self.interpolated.remove(&target);
        self.params = params;
        self.current = Some(CurrentSlice {
            z: target,
            template,
            seed,
            basis: Provenance::Computed,
            segmentation,
        });
        self.record(EventKind::AcceptAndAdvance {
            direction,
            skip,
            params: Some(params),
        });
        Ok(&self.current.as_ref().expect("just set").segmentation)
    }

    /// Replaces the template and seed of the slice under review and recomputes its cut.
    pub fn redraw(
        &mut self,
        template: Vec<Point2>,
        seed: Point2,
        params: Option<GraphParams>,
    ) -> Result<&SliceSegmentation> {
        let z = self.reviewing()?.z;
        let params = params.unwrap_or(self.params);
        params.validate()?;
        let current = segment_user_template(&self.volume, z, template.clone(), seed, &params)?;
        self.params = params;
        self.current = Some(current);
        self.record(EventKind::Redraw {
            template,
            seed,
            params: Some(params),
        });
        Ok(&self.current.as_ref().expect("just set").segmentation)
    }

    /// Fills every unsegmented slice inside the segmented range, treating the
    /// cut under review as segmented.
    pub fn interpolate_missing(&mut self) -> Result<InterpolationReport> {
        if self.status == Status::Finalized {
            return Err(Error::State("session is finalized".into()));
        }
        let report = self.fill_gaps()?;
        self.record(EventKind::Interpolate);
        Ok(report)
    }

    /// Accepts the cut under review, interpolates all gaps and freezes the session.
    pub fn finalize(&mut self) -> Result<InterpolationReport> {
        let current = self.reviewing()?.clone();
        let report = self.fill_gaps()?;
        self.accepted.insert(
            current.z,
            SliceContour {
                z: current.z,
                provenance: current.basis,
                vertices: current.segmentation.cut.contour,
            },
        );
        self.current = None;
        self.status = Status::Finalized;
        self.record(EventKind::Finalize);
        Ok(report)
    }

    /// All stored contours, sorted by slice; includes the cut under review
    /// while reviewing.
    pub fn contour_set(&self) -> ContourSet {
        let mut all: BTreeMap<usize, SliceContour> = self.accepted.clone();
        for (&z, v) in &self.interpolated {
            all.entry(z).or_insert_with(|| SliceContour {
                z,
                provenance: Provenance::Interpolated,
                vertices: v.clone(),
            });
        }
        if let Some(c) = &self.current {
            all.insert(
                c.z,
                SliceContour {
                    z: c.z,
                    provenance: c.basis,
                    vertices: c.segmentation.cut.contour.clone(),
                },
            );
        }
        ContourSet {
            object: self.object.clone(),
            slices: all.into_values().collect(),
        }
    }

    pub fn voxelize(&self) -> Result<MaskVolume> {
        self.finalized()?;
        voxelize_contours(&self.contour_set(), *self.volume.grid())
    }

    /// Contour JSON and mask NRRD bytes.
    pub fn export(&self) -> Result<(Vec<u8>, Vec<u8>)> {
        let mask = self.voxelize()?;
        Ok((write_contour_set(&self.contour_set())?, write_mask_nrrd(&mask)))
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let contours = self.contour_set();
        let gaps = match (contours.slices.first(), contours.slices.last()) {
            (Some(a), Some(b)) => (a.z..=b.z).filter(|&z| contours.get(z).is_none()).collect(),
            _ => Vec::new(),
        };
        SessionSnapshot {
            object: self.object.clone(),
            status: self.status,
            params: self.params,
            current_z: self.current.as_ref().map(|c| c.z),
            current_template: self.current.as_ref().map(|c| c.template.markers.clone()),
            current_seed: self.current.as_ref().map(|c| c.seed.position),
            current_cut: self.current.as_ref().map(|c| c.segmentation.cut.clone()),
            contours,
            gaps,
            elapsed_ms: self.replay_log().elapsed_ms(),
            events: self.log.len(),
        }
    }

    fn reviewing(&self) -> Result<&CurrentSlice> {
        match (&self.status, &self.current) {
            (Status::Reviewing, Some(c)) => Ok(c),
            _ => Err(Error::State("no cut under review; the session is finalized".into())),
        }
    }

    fn finalized(&self) -> Result<()> {
        if self.status != Status::Finalized {
            return Err(Error::State("session is not finalized".into()));
        }
        Ok(())
    }

    fn segmented_range_with(&self, z: usize) -> (usize, usize) {
        let lo = self.accepted.keys().next().map_or(z, |&k| k.min(z));
        let hi = self.accepted.keys().next_back().map_or(z, |&k| k.max(z));
        (lo, hi)
    }

    fn fill_gaps(&mut self) -> Result<InterpolationReport> {
        let mut known: BTreeMap<usize, Vec<Point2>> =
            self.accepted.iter().map(|(&z, c)| (z, c.vertices.clone())).collect();
        if let Some(c) = &self.current {
            known.insert(c.z, c.segmentation.cut.contour.clone());
        }
        let (lo, hi) = match (known.keys().next(), known.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(Error::State("nothing segmented yet".into())),
        };
        let filled = interpolate_gaps(&known, lo..=hi, self.params.k)?;
        self.interpolated = filled;
        Ok(InterpolationReport {
            interpolated: self.interpolated.keys().copied().collect(),
            segmented: known.keys().copied().collect(),
        })
    }

    fn record(&mut self, kind: EventKind) {
        self.log.push(SessionEvent { at_ms: now_ms(), kind });
    }
}

fn segment_user_template(
    volume: &Volume3D,
    z: usize,
    markers: Vec<Point2>,
    seed: Point2,
    params: &GraphParams,
) -> Result<CurrentSlice> {
    let template = Template::new(markers, z)?;
    let seed = SeedPoint {
        position: seed,
        z_index: z,
    };
    let slice = volume.extract_slice(z)?;
    let segmentation = SliceSegmentation::run(&slice, &template, seed, params)?;
    Ok(CurrentSlice {
        z,
        template,
        seed,
        basis: Provenance::UserDrawn,
        segmentation,
    })
}
