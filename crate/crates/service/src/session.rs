//! Pipeline workers.
//!
//! A worker is a dedicated OS thread that owns a frame source and renders
//! frames in order. Controls arrive on a channel and are drained between
//! frames, so every frame sees a single parameter snapshot. Finished frames
//! go out on a one-slot broadcast channel: a subscriber that falls behind
//! skips to the newest frame.

use std::sync::mpsc;
use std::sync::Arc;
use std::thread;

use depthmatte::stream::{FrameSource, FrameStepper, FrameTimings, Pacer};
use depthmatte::{apply_update, ColorFrame, MatteParams, ParamUpdate, Pipeline};
use tokio::sync::{broadcast, oneshot};

use crate::config::ServiceConfig;

#[derive(Debug)]
pub struct Rendered {
    pub frame: ColorFrame,
    pub frame_index: u64,
    pub params_hash: u32,
    pub timings: FrameTimings,
}

pub type ParamsReply = depthmatte::Result<MatteParams>;

enum Command {
    SetParams(ParamUpdate, oneshot::Sender<ParamsReply>),
    Background(Arc<ColorFrame>),
    Pause,
    Resume,
}

/// Control side of a worker. Dropping every clone stops the worker after
/// its current frame.
#[derive(Clone)]
pub struct SessionHandle {
    commands: mpsc::Sender<Command>,
    // A receiver rather than a sender, so subscribers see the channel close
    // when the worker exits.
    frames: Arc<broadcast::Receiver<Arc<Rendered>>>,
}

impl SessionHandle {
    pub fn spawn(config: Arc<ServiceConfig>) -> depthmatte::Result<Self> {
        let pipeline = Pipeline::new(&config.pipeline)?;
        let source = config.source.open()?;
        let background = config
            .background(&config.default_background)
            .or_else(|| config.backgrounds.values().next().cloned())
            .ok_or_else(|| depthmatte::Error::InvalidFrame("no backgrounds configured".into()))?;
        let (commands, rx) = mpsc::channel();
        let (frames, first) = broadcast::channel(1);
        let worker = Worker {
            params: config.initial_params.clone(),
            background,
            realtime: config.realtime,
            commands: rx,
            frames,
            paused: false,
        };
        thread::Builder::new()
            .name("pipeline-worker".into())
            .spawn(move || worker.run(&pipeline, source))
            .map_err(|e| depthmatte::Error::InvalidFrame(format!("worker thread: {e}")))?;
        Ok(Self {
            commands,
            frames: Arc::new(first),
        })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<Rendered>> {
        self.frames.resubscribe()
    }

    /// Merges `update` into the worker's parameters. The reply arrives once
    /// the update is in force: every frame rendered afterwards uses it.
    pub async fn set_params(&self, update: ParamUpdate) -> Option<ParamsReply> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(Command::SetParams(update, tx)).ok()?;
        rx.await.ok()
    }

    pub fn select_background(&self, frame: Arc<ColorFrame>) -> bool {
        self.commands.send(Command::Background(frame)).is_ok()
    }

    pub fn pause(&self) -> bool {
        self.commands.send(Command::Pause).is_ok()
    }

    pub fn resume(&self) -> bool {
        self.commands.send(Command::Resume).is_ok()
    }
}

struct Worker {
    params: MatteParams,
    background: Arc<ColorFrame>,
    realtime: bool,
    commands: mpsc::Receiver<Command>,
    frames: broadcast::Sender<Arc<Rendered>>,
    paused: bool,
}

impl Worker {
    fn run(mut self, pipeline: &Pipeline, mut source: Box<dyn FrameSource>) {
        let mut stepper = FrameStepper::new(pipeline, source.as_mut());
        let mut pacer = self.realtime.then(Pacer::sixty_hz);
        let mut index = 0u64;
        loop {
            if !self.drain(&mut stepper) {
                return;
            }
            if let Some(p) = pacer.as_mut() {
                p.wait();
            }
            match stepper.step(index, &self.background, &self.params) {
                Ok(s) => {
                    // No subscribers is fine: a client may be between frames.
                    let _ = self.frames.send(Arc::new(Rendered {
                        frame: s.frame,
                        frame_index: s.info.frame_index,
                        params_hash: s.info.params_hash,
                        timings: s.timings,
                    }));
                }
                Err(e) => {
                    tracing::error!("pipeline worker stopped: {e}");
                    return;
                }
            }
            index += 1;
        }
    }

    /// Applies pending controls. Blocks while paused. Returns false once
    /// every handle is gone.
    fn drain(&mut self, stepper: &mut FrameStepper<'_>) -> bool {
        loop {
            let next = if self.paused {
                self.commands.recv().map_err(|_| mpsc::TryRecvError::Disconnected)
            } else {
                self.commands.try_recv()
            };
            match next {
                Ok(cmd) => self.apply(cmd, stepper),
                Err(mpsc::TryRecvError::Empty) => return true,
                Err(mpsc::TryRecvError::Disconnected) => return false,
            }
        }
    }

    fn apply(&mut self, cmd: Command, stepper: &mut FrameStepper<'_>) {
        match cmd {
            Command::SetParams(update, reply) => {
                let result = apply_update(&self.params, &update);
                if let Ok(p) = &result {
                    self.params = p.clone();
                }
                let _ = reply.send(result);
            }
            Command::Background(frame) => {
                self.background = frame;
                stepper.reset_background();
            }
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
        }
    }
}
