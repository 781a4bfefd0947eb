use super::{CaptureError, CaptureMethod, CyclePhase, CycleSchedule, Engine, StereoSample};
use crate::render::{render_side, FrameBuffer, RenderError, Side};

/// One temporal-controlled frame swap cycle, step by step. Each step checks
/// that it runs in the phase the protocol expects.
pub struct TefsCycle<'e> {
    engine: &'e mut Engine,
    schedule: CycleSchedule,
    start_tick: u64,
    phase: CyclePhase,
    left: Option<FrameBuffer>,
    right: Option<FrameBuffer>,
}

impl<'e> TefsCycle<'e> {
    pub fn begin(engine: &'e mut Engine, schedule: CycleSchedule) -> Result<Self, CaptureError> {
        schedule.validate().map_err(CaptureError::Config)?;
        let driving = !engine.world.is_paused() && engine.world.clock.time_scale == 1.0;
        if !driving {
            return Err(CaptureError::Protocol {
                phase: CyclePhase::Driving,
                detail: "cycle must start from normal driving at time scale 1".into(),
            });
        }
        Ok(Self {
            start_tick: engine.world.clock.uni_tick,
            engine,
            schedule,
            phase: CyclePhase::Driving,
            left: None,
            right: None,
        })
    }

    pub fn phase(&self) -> CyclePhase {
        self.phase
    }

    pub fn engine(&self) -> &Engine {
        self.engine
    }

    fn expect(&self, expected: CyclePhase) -> Result<(), CaptureError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(CaptureError::PhaseOrder {
                expected,
                actual: self.phase,
            })
        }
    }

    fn violation(&self, detail: impl Into<String>) -> CaptureError {
        CaptureError::Protocol {
            phase: self.phase,
            detail: detail.into(),
        }
    }

    fn tick_until(&mut self, offset: u32) {
        while self.engine.world.clock.uni_tick < self.start_tick + offset as u64 {
            self.engine.tick();
        }
    }

    /// Drives to `T+preset`, then sets the time scale to 0.
    pub fn preset_pseudo_pause(&mut self) -> Result<(), CaptureError> {
        self.expect(CyclePhase::Driving)?;
        self.tick_until(self.schedule.preset);
        self.engine.world.set_time_scale(0.0)?;
        self.phase = CyclePhase::PresetPseudoPause;
        Ok(())
    }

    /// Runs the pseudo-paused ticks up to `T+left`, then pauses natively.
    pub fn pause_for_left(&mut self) -> Result<(), CaptureError> {
        self.expect(CyclePhase::PresetPseudoPause)?;
        self.tick_until(self.schedule.left);
        self.engine.world.native_pause();
        self.phase = CyclePhase::PausedLeftCapture;
        Ok(())
    }

    /// Reads the presented frame (RGB and depth buffer) for `side`. Only
    /// valid while natively paused in the matching capture phase.
    pub fn capture(&mut self, side: Side) -> Result<FrameBuffer, CaptureError> {
        let expected = match side {
            Side::Left => CyclePhase::PausedLeftCapture,
            Side::Right => CyclePhase::PausedRightCapture,
        };
        if self.phase != expected {
            return Err(self.violation(format!("{side:?} capture outside its paused phase")));
        }
        if self.engine.rig.active_side() != side {
            return Err(self.violation(format!(
                "{side:?} capture while the other camera is presented"
            )));
        }
        let frame = self
            .engine
            .renderer
            .render_view(&self.engine.world, &self.engine.rig)?;
        match side {
            Side::Left => self.left = Some(frame.clone()),
            Side::Right => self.right = Some(frame.clone()),
        }
        Ok(frame)
    }

    /// Forwards a swap request to the rig, attributing failures to the
    /// current phase.
    pub fn request_swap(&mut self, side: Side) -> Result<(), CaptureError> {
        let Engine { world, rig, .. } = &mut *self.engine;
        rig.request_camera_swap(world, side).map_err(|e| match e {
            RenderError::SwapWhilePaused => CaptureError::Protocol {
                phase: self.phase,
                detail: "camera swap requested while natively paused".into(),
            },
            other => other.into(),
        })
    }

    /// Resumes into pseudo-pause and requests the right camera.
    pub fn resume_and_swap(&mut self) -> Result<(), CaptureError> {
        self.expect(CyclePhase::PausedLeftCapture)?;
        if self.left.is_none() {
            return Err(self.violation("left view not captured"));
        }
        self.engine.world.native_resume();
        if !self.engine.world.clock.is_pseudo_paused() {
            return Err(self.violation("resume did not land in pseudo-pause"));
        }
        self.request_swap(Side::Right)?;
        self.phase = CyclePhase::SwapWait;
        Ok(())
    }

    /// Lets the swap complete over the ticks up to `T+right`, then pauses.
    pub fn pause_for_right(&mut self) -> Result<(), CaptureError> {
        self.expect(CyclePhase::SwapWait)?;
        self.tick_until(self.schedule.right);
        if self.engine.rig.active_side() != Side::Right {
            return Err(self.violation("swap to the right camera did not complete"));
        }
        self.engine.world.native_pause();
        self.phase = CyclePhase::PausedRightCapture;
        Ok(())
    }

    /// Restores the time scale while still paused, resumes, requests the
    /// left camera back and finishes the cycle. Returns both captures.
    pub fn restore(mut self) -> Result<(FrameBuffer, FrameBuffer), CaptureError> {
        self.expect(CyclePhase::PausedRightCapture)?;
        let (Some(left), Some(right)) = (self.left.take(), self.right.take()) else {
            return Err(self.violation("right view not captured"));
        };
        self.engine.world.set_time_scale(1.0)?;
        self.engine.world.native_resume();
        self.phase = CyclePhase::Restore;
        self.request_swap(Side::Left)?;
        self.tick_until(self.schedule.length);
        self.phase = CyclePhase::Driving;
        Ok((left, right))
    }
}

/// Full flow: drive, pseudo-pause, pause and read left, resume and swap,
/// pause and read right, restore.
pub fn run_tefs_cycle(
    engine: &mut Engine,
    schedule: CycleSchedule,
) -> Result<StereoSample, CaptureError> {
    let mut cycle = TefsCycle::begin(engine, schedule)?;
    cycle.preset_pseudo_pause()?;
    cycle.pause_for_left()?;
    cycle.capture(Side::Left)?;
    cycle.resume_and_swap()?;
    cycle.pause_for_right()?;
    cycle.capture(Side::Right)?;
    let (left, right) = cycle.restore()?;
    engine.assemble(CaptureMethod::Tefs, left, right)
}

/// Left view on one frame, right view on the next, no time control.
pub fn run_naive_swap_cycle(
    engine: &mut Engine,
    schedule: CycleSchedule,
) -> Result<StereoSample, CaptureError> {
    schedule.validate().map_err(CaptureError::Config)?;
    let start = engine.world.clock.uni_tick;
    let until = |engine: &mut Engine, offset: u32| {
        while engine.world.clock.uni_tick < start + offset as u64 {
            engine.tick();
        }
    };
    until(engine, schedule.left);
    let left = engine.renderer.render_view(&engine.world, &engine.rig)?;
    engine.rig.request_camera_swap(&engine.world, Side::Right)?;
    until(engine, schedule.left + 1);
    let right = engine.renderer.render_view(&engine.world, &engine.rig)?;
    engine.rig.request_camera_swap(&engine.world, Side::Left)?;
    until(engine, schedule.length);
    engine.assemble(CaptureMethod::NaiveSwap, left, right)
}

/// Reference capture: both views rendered from the same frozen instant.
/// The clock follows the TeFS timeline so timestamps line up.
pub fn run_dual_viewport_cycle(
    engine: &mut Engine,
    schedule: CycleSchedule,
) -> Result<StereoSample, CaptureError> {
    schedule.validate().map_err(CaptureError::Config)?;
    let start = engine.world.clock.uni_tick;
    let until = |engine: &mut Engine, offset: u32| {
        while engine.world.clock.uni_tick < start + offset as u64 {
            engine.tick();
        }
    };
    until(engine, schedule.preset);
    engine.world.set_time_scale(0.0)?;
    until(engine, schedule.left);
    let left = render_side(&engine.world, &engine.rig, Side::Left)?;
    let right = render_side(&engine.world, &engine.rig, Side::Right)?;
    until(engine, schedule.right);
    engine.world.set_time_scale(1.0)?;
    until(engine, schedule.length);
    engine.assemble(CaptureMethod::DualViewport, left, right)
}
