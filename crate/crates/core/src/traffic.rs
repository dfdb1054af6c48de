//! Application sessions and per-user activity timelines.
//!
//! A session is `N` activity periods separated by `N - 1` reading times.
//! Session starts follow an exponential inter-arrival law; a session whose
//! drawn start falls inside the previous session is pushed back to the end of
//! that session so sessions never overlap.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::stochastic::{Distribution, DistributionSpec, RandomStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Application {
    Web,
    Video,
    Call,
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Application::Web => "web",
            Application::Video => "video",
            Application::Call => "call",
        })
    }
}

/// Probability that a new session belongs to each application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApplicationMix {
    pub web: f64,
    pub video: f64,
    pub call: f64,
}

impl Default for ApplicationMix {
    fn default() -> Self {
        Self {
            web: 0.74,
            video: 0.03,
            call: 0.23,
        }
    }
}

impl ApplicationMix {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("web", self.web), ("video", self.video), ("call", self.call)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("probability must lie in [0, 1], got {p}")));
            }
        }
        let total = self.web + self.video + self.call;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("", format!("probabilities must sum to 1, got {total}")));
        }
        Ok(())
    }

    pub fn draw(&self, stream: &mut RandomStream) -> Application {
        let u = stream.uniform();
        if u < self.web {
            Application::Web
        } else if u < self.web + self.video {
            Application::Video
        } else if self.call > 0.0 {
            Application::Call
        } else if self.video > 0.0 {
            Application::Video
        } else {
            Application::Web
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkProfile {
    pub downlink_bps: f64,
    pub uplink_bps: f64,
}

impl Default for LinkProfile {
    fn default() -> Self {
        Self {
            downlink_bps: 3e8,
            uplink_bps: 3e8,
        }
    }
}

impl LinkProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [("downlink_bps", self.downlink_bps), ("uplink_bps", self.uplink_bps)] {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {rate}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WebParams {
    /// Bytes.
    pub main_object_size: DistributionSpec,
    /// Bytes.
    pub embedded_object_size: DistributionSpec,
    /// Rounded to the nearest integer when drawn.
    pub embedded_object_count: DistributionSpec,
    pub parsing_time: DistributionSpec,
    pub reading_time: DistributionSpec,
    pub pageviews: DistributionSpec,
}

/// Upper truncation of the embedded-object count.
pub const EMBEDDED_OBJECTS_MAX: f64 = 55.0;

impl Default for WebParams {
    fn default() -> Self {
        Self {
            main_object_size: DistributionSpec::TruncatedLognormal {
                mu: 15.098,
                sigma: 4.390e-5,
                min: 100.0,
                max: 6e6,
            },
            embedded_object_size: DistributionSpec::TruncatedLognormal {
                mu: 6.17,
                sigma: 2.36,
                min: 50.0,
                max: 2e6,
            },
            embedded_object_count: DistributionSpec::truncated_pareto_with_mean(
                22.0,
                1.1,
                EMBEDDED_OBJECTS_MAX,
            )
            .expect("constant parameters"),
            parsing_time: DistributionSpec::Exponential { mean: 0.13 },
            reading_time: DistributionSpec::Exponential { mean: 30.0 },
            pageviews: DistributionSpec::Geometric { p: 0.893 },
        }
    }
}

/// Encoding-rate range of one video format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoFormat {
    pub itag: u32,
    pub min_bps: f64,
    pub max_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoParams {
    /// Formats are chosen with equal probability.
    pub formats: Vec<VideoFormat>,
    /// Media duration in seconds.
    pub duration: DistributionSpec,
    pub reading_time: DistributionSpec,
    pub videoviews: DistributionSpec,
    /// Media seconds delivered at link rate before throttling starts.
    pub burst_seconds: f64,
    /// Throttled delivery rate as a multiple of the encoding rate.
    pub throttle_factor: f64,
}

impl Default for VideoParams {
    fn default() -> Self {
        let format = |itag, lo: f64, hi: f64| VideoFormat {
            itag,
            min_bps: lo * 1e6,
            max_bps: hi * 1e6,
        };
        Self {
            formats: vec![
                format(137, 2.5, 3.0),
                format(264, 4.0, 4.5),
                format(266, 12.5, 16.0),
                format(315, 20.0, 25.0),
            ],
            duration: DistributionSpec::TruncatedLognormal {
                mu: 175f64.ln(),
                sigma: 1.0,
                min: 10.0,
                max: 3600.0,
            },
            reading_time: DistributionSpec::Exponential { mean: 30.0 },
            videoviews: DistributionSpec::Geometric { p: 0.6 },
            burst_seconds: 40.0,
            throttle_factor: 1.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CallParams {
    pub holding_time: DistributionSpec,
    /// Constant bit rate of the call; recorded only, it does not shape timing.
    pub rate_bps: f64,
}

impl Default for CallParams {
    fn default() -> Self {
        Self {
            holding_time: DistributionSpec::GeneralizedPareto {
                shape: -0.39,
                scale: 69.33,
                location: 0.0,
            },
            rate_bps: 1.5e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficParams {
    /// Time between the starts of consecutive sessions.
    pub session_interarrival: DistributionSpec,
    pub web: WebParams,
    pub video: VideoParams,
    pub call: CallParams,
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            session_interarrival: DistributionSpec::Exponential { mean: 1200.0 },
            web: WebParams::default(),
            video: VideoParams::default(),
            call: CallParams::default(),
        }
    }
}

/// Activity and reading-time draws of one session, before placement on a
/// timeline. `reading_times.len() == activities.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionDraw {
    pub app: Application,
    pub activities: Vec<f64>,
    pub reading_times: Vec<f64>,
}

impl SessionDraw {
    /// Wall-clock length from the first activity start to the last activity end.
    pub fn length(&self) -> f64 {
        self.activities.iter().sum::<f64>() + self.reading_times.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityPeriod {
    pub start: f64,
    pub end: f64,
    pub app: Application,
    /// Index into [`SessionTrace::session_starts`].
    pub session: usize,
}

/// Activity timeline of one user over `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub ue_id: u32,
    pub horizon: f64,
    pub periods: Vec<ActivityPeriod>,
    pub session_starts: Vec<f64>,
}

#[derive(Debug, Clone)]
struct WebModel {
    main_object_size: Distribution,
    embedded_object_size: Distribution,
    embedded_object_count: Distribution,
    parsing_time: Distribution,
    reading_time: Distribution,
    pageviews: Distribution,
}

#[derive(Debug, Clone)]
struct VideoModel {
    formats: Vec<VideoFormat>,
    duration: Distribution,
    reading_time: Distribution,
    videoviews: Distribution,
    burst_seconds: f64,
    throttle_factor: f64,
}

/// Validated traffic parameters bound to a link profile.
#[derive(Debug, Clone)]
pub struct TrafficModel {
    link: LinkProfile,
    session_interarrival: Distribution,
    web: WebModel,
    video: VideoModel,
    holding_time: Distribution,
}

fn law(spec: DistributionSpec, field: &str) -> Result<Distribution> {
    Distribution::new(spec).map_err(|e| e.within(field))
}

impl TrafficModel {
    pub fn new(params: &TrafficParams, link: LinkProfile) -> Result<Self> {
        link.validate().map_err(|e| e.within("link"))?;
        let web = &params.web;
        let video = &params.video;
        if video.formats.is_empty() {
            return Err(Error::param("video.formats", "at least one format is required"));
        }
        for (i, f) in video.formats.iter().enumerate() {
            let field = format!("video.formats[{i}]");
            if !(f.min_bps > 0.0 && f.min_bps < f.max_bps && f.max_bps.is_finite()) {
                return Err(Error::param(
                    field,
                    format!("need 0 < min_bps < max_bps, got ({}, {})", f.min_bps, f.max_bps),
                ));
            }
            if !(f.max_bps * video.throttle_factor < link.downlink_bps) {
                return Err(Error::param(
                    field,
                    "throttled rate must stay below the downlink rate",
                ));
            }
        }
        if !(video.burst_seconds >= 0.0 && video.burst_seconds.is_finite()) {
            return Err(Error::param("video.burst_seconds", "must be finite and >= 0"));
        }
        if !(video.throttle_factor > 1.0 && video.throttle_factor.is_finite()) {
            return Err(Error::param(
                "video.throttle_factor",
                "throttled rate must exceed the encoding rate (factor > 1)",
            ));
        }
        if !(params.call.rate_bps > 0.0) {
            return Err(Error::param("call.rate_bps", "must be > 0"));
        }
        let model = Self {
            link,
            session_interarrival: law(params.session_interarrival, "session_interarrival")?,
            web: WebModel {
                main_object_size: law(web.main_object_size, "web.main_object_size")?,
                embedded_object_size: law(web.embedded_object_size, "web.embedded_object_size")?,
                embedded_object_count: law(
                    web.embedded_object_count,
                    "web.embedded_object_count",
                )?,
                parsing_time: law(web.parsing_time, "web.parsing_time")?,
                reading_time: law(web.reading_time, "web.reading_time")?,
                pageviews: law(web.pageviews, "web.pageviews")?,
            },
            video: VideoModel {
                formats: video.formats.clone(),
                duration: law(video.duration, "video.duration")?,
                reading_time: law(video.reading_time, "video.reading_time")?,
                videoviews: law(video.videoviews, "video.videoviews")?,
                burst_seconds: video.burst_seconds,
                throttle_factor: video.throttle_factor,
            },
            holding_time: law(params.call.holding_time, "call.holding_time")?,
        };
        for (field, d) in [
            ("web.main_object_size", model.web.main_object_size),
            ("web.embedded_object_size", model.web.embedded_object_size),
            ("web.embedded_object_count", model.web.embedded_object_count),
            ("web.parsing_time", model.web.parsing_time),
            ("web.reading_time", model.web.reading_time),
            ("video.reading_time", model.video.reading_time),
            ("call.holding_time", model.holding_time),
            ("session_interarrival", model.session_interarrival),
            ("video.duration", model.video.duration),
        ] {
            if d.support().0 < 0.0 {
                return Err(Error::param(field, "support must be nonnegative"));
            }
        }
        for (field, d) in [
            ("web.pageviews", model.web.pageviews),
            ("video.videoviews", model.video.videoviews),
        ] {
            if d.support().0 < 1.0 {
                return Err(Error::param(field, "count law must have support >= 1"));
            }
        }
        Ok(model)
    }

    pub fn link(&self) -> LinkProfile {
        self.link
    }

    pub fn session_interarrival(&self) -> &Distribution {
        &self.session_interarrival
    }

    /// Reading-time law of the given application (calls have a single period).
    pub fn reading_time(&self, app: Application) -> Option<&Distribution> {
        match app {
            Application::Web => Some(&self.web.reading_time),
            Application::Video => Some(&self.video.reading_time),
            Application::Call => None,
        }
    }

    pub fn generate_web_session(&self, stream: &mut RandomStream) -> SessionDraw {
        let pages = self.web.pageviews.sample(stream).round().max(1.0) as usize;
        let rate = self.link.downlink_bps;
        let mut embedded = Vec::new();
        let activities = (0..pages)
            .map(|_| {
                let main = self.web.main_object_size.sample(stream);
                let count = self.web.embedded_object_count.sample(stream).round() as usize;
                embedded.clear();
                embedded.extend((0..count).map(|_| {
                    let size = self.web.embedded_object_size.sample(stream);
                    let parse = self.web.parsing_time.sample(stream);
                    (size, parse)
                }));
                web_page_duration(main, &embedded, rate)
            })
            .collect();
        let reading_times = (1..pages)
            .map(|_| self.web.reading_time.sample(stream))
            .collect();
        SessionDraw {
            app: Application::Web,
            activities,
            reading_times,
        }
    }

    pub fn generate_video_session(&self, stream: &mut RandomStream) -> SessionDraw {
        let views = self.video.videoviews.sample(stream).round().max(1.0) as usize;
        let activities = (0..views)
            .map(|_| {
                let format = self.video.formats[stream.index(self.video.formats.len())];
                let encoding =
                    format.min_bps + (format.max_bps - format.min_bps) * stream.uniform();
                let duration = self.video.duration.sample(stream);
                video_download_time(
                    duration,
                    encoding,
                    self.link.downlink_bps,
                    self.video.burst_seconds,
                    self.video.throttle_factor,
                )
            })
            .collect();
        let reading_times = (1..views)
            .map(|_| self.video.reading_time.sample(stream))
            .collect();
        SessionDraw {
            app: Application::Video,
            activities,
            reading_times,
        }
    }

    pub fn generate_call_session(&self, stream: &mut RandomStream) -> SessionDraw {
        SessionDraw {
            app: Application::Call,
            activities: vec![self.holding_time.sample(stream)],
            reading_times: Vec::new(),
        }
    }

    pub fn generate_session(&self, app: Application, stream: &mut RandomStream) -> SessionDraw {
        match app {
            Application::Web => self.generate_web_session(stream),
            Application::Video => self.generate_video_session(stream),
            Application::Call => self.generate_call_session(stream),
        }
    }

    /// Lay out sessions for one user on `[0, sim_duration)`.
    ///
    /// Periods starting at or after `sim_duration` are dropped and the last
    /// one is clipped so that every `end <= sim_duration`.
    pub fn generate_user_timeline(
        &self,
        ue_id: u32,
        sim_duration: f64,
        mix: &ApplicationMix,
        stream: &mut RandomStream,
    ) -> Result<SessionTrace> {
        if !(sim_duration > 0.0 && sim_duration.is_finite()) {
            return Err(Error::param(
                "sim_duration_s",
                format!("must be finite and > 0, got {sim_duration}"),
            ));
        }
        let mut trace = SessionTrace {
            ue_id,
            horizon: sim_duration,
            periods: Vec::new(),
            session_starts: Vec::new(),
        };
        let mut start = self.session_interarrival.sample(stream);
        while start < sim_duration {
            let app = mix.draw(stream);
            let draw = self.generate_session(app, stream);
            let session = trace.session_starts.len();
            trace.session_starts.push(start);

            let mut t = start;
            for (i, &activity) in draw.activities.iter().enumerate() {
                if i > 0 {
                    t += draw.reading_times[i - 1];
                }
                if t < sim_duration {
                    trace.periods.push(ActivityPeriod {
                        start: t,
                        end: (t + activity).min(sim_duration),
                        app,
                        session,
                    });
                }
                t += activity;
            }
            let session_end = t;
            let candidate = start + self.session_interarrival.sample(stream);
            start = candidate.max(session_end);
        }
        Ok(trace)
    }
}

/// Time to fetch one page: main object, then each embedded object with its
/// parsing time, all sequential at the link rate.
pub fn web_page_duration(main_bytes: f64, embedded: &[(f64, f64)], rate_bps: f64) -> f64 {
    main_bytes * 8.0 / rate_bps
        + embedded
            .iter()
            .map(|&(bytes, parse)| parse + bytes * 8.0 / rate_bps)
            .sum::<f64>()
}

/// Download time of a progressive video: the first `burst_seconds` of media
/// at link rate, the remainder at `throttle_factor` times the encoding rate.
pub fn video_download_time(
    duration_s: f64,
    encoding_bps: f64,
    link_bps: f64,
    burst_seconds: f64,
    throttle_factor: f64,
) -> f64 {
    let burst_media = duration_s.min(burst_seconds);
    burst_media * encoding_bps / link_bps + (duration_s - burst_seconds).max(0.0) / throttle_factor
}

/// Dump activity periods as `ue_id,app,start_s,end_s`.
pub fn write_sessions_csv<W: Write>(traces: &[SessionTrace], mut out: W) -> std::io::Result<()> {
    writeln!(out, "ue_id,app,start_s,end_s")?;
    for trace in traces {
        for p in &trace.periods {
            writeln!(out, "{},{},{:.9},{:.9}", trace.ue_id, p.app, p.start, p.end)?;
        }
    }
    Ok(())
}
