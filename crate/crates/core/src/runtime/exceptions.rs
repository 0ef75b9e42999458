//! Hardware-style exception entry and return: an 8-word context frame is
//! stacked and unstacked exactly as the silicon does, and the EXC_RETURN
//! magic values encode which bank and mode to resume.

use super::{
    Bank, CpuState, CrashKind, Memory, Mode, EXC_RETURN_HANDLER, EXC_RETURN_THREAD_MAIN,
    EXC_RETURN_THREAD_PROCESS,
};
use crate::thumb2::ItState;

pub const FRAME_WORDS: [usize; 6] = [0, 1, 2, 3, 12, 14];

/// Push the 8-word frame {r0-r3, r12, lr, return_addr, xPSR} onto the
/// active stack, switch to handler mode on the main stack, load the magic
/// EXC_RETURN into lr, and jump to the vector.
///
/// `vector` is the raw vector-table word (thumb bit set); `return_addr`
/// is the pc execution resumes at after the matching return.
pub fn exception_entry(
    cpu: &mut CpuState,
    mem: &mut Memory,
    exc_num: u32,
    vector: u32,
    return_addr: u32,
) -> Result<(), CrashKind> {
    let frame_ptr = cpu.sp().wrapping_sub(32);
    let magic = match (cpu.mode, cpu.active_bank()) {
        (Mode::Handler, _) => EXC_RETURN_HANDLER,
        (Mode::Thread, Bank::Main) => EXC_RETURN_THREAD_MAIN,
        (Mode::Thread, Bank::Process) => EXC_RETURN_THREAD_PROCESS,
    };

    let push = |mem: &mut Memory, off: u32, value: u32| {
        mem.write(frame_ptr + off * 4, 4, value)
            .map_err(CrashKind::from_fault)
    };
    for (slot, reg) in FRAME_WORDS.iter().enumerate() {
        push(mem, slot as u32, cpu.r[*reg])?;
    }
    push(mem, 6, return_addr)?;
    push(mem, 7, cpu.xpsr())?;

    cpu.set_sp(frame_ptr);
    cpu.r[14] = magic;
    cpu.set_mode(Mode::Handler);
    cpu.current_exc = exc_num;
    cpu.it_state = ItState::default();
    cpu.r[15] = vector & !1;
    Ok(())
}

/// Unstack the frame selected by `magic` and resume. Any pc-load of a
/// magic value in handler mode routes here; other 0xFFFFFFxx values are
/// invalid.
pub fn exception_return(cpu: &mut CpuState, mem: &mut Memory, magic: u32) -> Result<(), CrashKind> {
    debug_assert_eq!(cpu.mode, Mode::Handler);
    let (mode, spsel) = match magic {
        EXC_RETURN_HANDLER => (Mode::Handler, None),
        EXC_RETURN_THREAD_MAIN => (Mode::Thread, Some(false)),
        EXC_RETURN_THREAD_PROCESS => (Mode::Thread, Some(true)),
        _ => return Err(CrashKind::InvalidExcReturn { value: magic }),
    };

    // Select the bank the frame lives on.
    let frame_ptr = match (mode, spsel) {
        (Mode::Handler, _) | (Mode::Thread, Some(false)) => cpu.sp_main,
        (Mode::Thread, Some(true)) => cpu.sp_process,
        _ => unreachable!(),
    };

    let pop = |mem: &Memory, off: u32| -> Result<u32, CrashKind> {
        mem.read(frame_ptr + off * 4, 4)
            .map_err(CrashKind::from_fault)
    };
    let mut frame = [0u32; 8];
    for (slot, value) in frame.iter_mut().enumerate() {
        *value = pop(mem, slot as u32)?;
    }

    for (slot, reg) in FRAME_WORDS.iter().enumerate() {
        cpu.r[*reg] = frame[slot];
    }
    let xpsr = frame[7];

    match (mode, spsel) {
        (Mode::Handler, _) => {
            cpu.set_sp_main(frame_ptr.wrapping_add(32));
            cpu.set_mode(Mode::Handler);
            cpu.current_exc = xpsr & 0x1FF;
        }
        (Mode::Thread, Some(sel)) => {
            if sel {
                cpu.set_sp_process(frame_ptr.wrapping_add(32));
            } else {
                cpu.set_sp_main(frame_ptr.wrapping_add(32));
            }
            cpu.set_spsel(sel);
            cpu.set_mode(Mode::Thread);
            cpu.current_exc = 0;
        }
        _ => unreachable!(),
    }
    cpu.restore_xpsr_flags(xpsr);
    // IPSR bits of the stacked word belong to the interrupted context;
    // flags/IT were restored above, mode came from the magic value.
    cpu.r[15] = frame[6] & !1;
    Ok(())
}

/// True when a value written to pc must be treated as an exception return
/// rather than a branch target.
pub fn is_exc_return_magic(cpu: &CpuState, value: u32) -> bool {
    cpu.mode == Mode::Handler && value & 0xFFFF_FF00 == 0xFFFF_FF00
}
