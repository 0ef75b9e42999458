//! The shipped handler set for a minimal HAL surface: uart send/receive,
//! SysTick configuration, timer start/stop, gpio, nvic enable/disable, and
//! a family of constant-return initialization stubs. Most HAL functions in
//! MCU firmware are trivial init calls, so most of this set is the
//! low-fidelity constant-return kind.

use super::{
    ControlTransfer, Fidelity, HalCallContext, HaltReason, HandlerError, HandlerManifest,
    HandlerRegistry, ManifestEntry, BUILTIN_REGISTRY_VERSION,
};
use crate::runtime::{EXC_IRQ0, EXC_SYSTICK};

const HAL_OK: u32 = 0;

/// `uart_receive(huart, buf, len, timeout)`: fill `buf` with `len` input
/// bytes. A stream with fewer bytes than requested behaves like a receive
/// that would block forever: the run halts as input-exhausted.
fn uart_receive(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let buf = ctx.arg(1)?;
    let len = ctx.arg(2)?;
    let bytes = match ctx.input.take(len as usize) {
        Some(b) => b.to_vec(),
        None => return Ok(ControlTransfer::Halt(HaltReason::InputExhausted)),
    };
    for (i, b) in bytes.iter().enumerate() {
        ctx.mem.write(buf + i as u32, 1, *b as u32)?;
    }
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// `uart_transmit(huart, buf, len, timeout)`: capture the bytes.
fn uart_transmit(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let buf = ctx.arg(1)?;
    let len = ctx.arg(2)?;
    for i in 0..len {
        let b = ctx.mem.read(buf + i, 1)?;
        ctx.uart_out.push(b as u8);
    }
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// `systick_config(ticks)`: program the SysTick virtual timer at an
/// interval of `ticks` instructions and mark it configured.
fn systick_config(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let interval = ctx.arg(0)?.max(1);
    ctx.clock.program(EXC_SYSTICK, interval as u64);
    ctx.pending.configure(EXC_SYSTICK);
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// `timer_start_it(irqn, interval)`: start a periodic timer wired to
/// external interrupt `irqn`. Delivery still waits for `nvic_enable_irq`.
fn timer_start_it(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let irqn = ctx.arg(0)?;
    let interval = ctx.arg(1)?.max(1);
    ctx.clock.program(EXC_IRQ0 + irqn, interval as u64);
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// `timer_stop_it(irqn)`.
fn timer_stop_it(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let irqn = ctx.arg(0)?;
    ctx.clock.disable(EXC_IRQ0 + irqn);
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// `nvic_enable_irq(irqn)`: the configuration gate for external
/// interrupts.
fn nvic_enable_irq(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let irqn = ctx.arg(0)?;
    ctx.pending.configure(EXC_IRQ0 + irqn);
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// `nvic_disable_irq(irqn)`.
fn nvic_disable_irq(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    let irqn = ctx.arg(0)?;
    ctx.pending.deconfigure(EXC_IRQ0 + irqn);
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

/// Constant-return stub: peripheral effect irrelevant under high-level
/// modeling, returns success.
fn const_ok(ctx: &mut HalCallContext<'_>) -> Result<ControlTransfer, HandlerError> {
    ctx.set_return(HAL_OK);
    Ok(ControlTransfer::ReturnToCaller)
}

struct Builtin {
    id: &'static str,
    symbols: &'static [&'static str],
    fidelity: Fidelity,
    consumes_input: bool,
    f: super::HandlerFn,
}

const BUILTINS: &[Builtin] = &[
    Builtin {
        id: "uart_receive",
        symbols: &["HAL_UART_Receive", "HAL_UART_Receive_IT"],
        fidelity: Fidelity::High,
        consumes_input: true,
        f: uart_receive,
    },
    Builtin {
        id: "uart_transmit",
        symbols: &["HAL_UART_Transmit", "HAL_UART_Transmit_IT"],
        fidelity: Fidelity::High,
        consumes_input: false,
        f: uart_transmit,
    },
    Builtin {
        id: "systick_config",
        symbols: &["HAL_SYSTICK_Config", "SysTick_Config"],
        fidelity: Fidelity::High,
        consumes_input: false,
        f: systick_config,
    },
    Builtin {
        id: "timer_start_it",
        symbols: &["HAL_TIM_Base_Start_IT"],
        fidelity: Fidelity::High,
        consumes_input: false,
        f: timer_start_it,
    },
    Builtin {
        id: "timer_stop_it",
        symbols: &["HAL_TIM_Base_Stop_IT"],
        fidelity: Fidelity::High,
        consumes_input: false,
        f: timer_stop_it,
    },
    Builtin {
        id: "nvic_enable_irq",
        symbols: &["HAL_NVIC_EnableIRQ", "NVIC_EnableIRQ"],
        fidelity: Fidelity::High,
        consumes_input: false,
        f: nvic_enable_irq,
    },
    Builtin {
        id: "nvic_disable_irq",
        symbols: &["HAL_NVIC_DisableIRQ", "NVIC_DisableIRQ"],
        fidelity: Fidelity::High,
        consumes_input: false,
        f: nvic_disable_irq,
    },
    // Constant-return low-fidelity stubs: initialization chatter with no
    // observable effect under high-level modeling.
    Builtin {
        id: "hal_init",
        symbols: &["HAL_Init"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "hal_deinit",
        symbols: &["HAL_DeInit"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "clock_config",
        symbols: &["SystemClock_Config", "HAL_RCC_ClockConfig"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "osc_config",
        symbols: &["HAL_RCC_OscConfig", "HAL_TIM_OscConfig"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "pwr_config",
        symbols: &["HAL_PWREx_ControlVoltageScaling"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "systick_clksource",
        symbols: &["HAL_SYSTICK_CLKSourceConfig"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "uart_init",
        symbols: &["HAL_UART_Init", "MX_USART2_UART_Init"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "gpio_init",
        symbols: &["HAL_GPIO_Init", "MX_GPIO_Init"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "gpio_write",
        symbols: &["HAL_GPIO_WritePin"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "gpio_read",
        symbols: &["HAL_GPIO_ReadPin"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "gpio_toggle",
        symbols: &["HAL_GPIO_TogglePin"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
    Builtin {
        id: "tim_base_init",
        symbols: &["HAL_TIM_Base_Init"],
        fidelity: Fidelity::Low,
        consumes_input: false,
        f: const_ok,
    },
];

/// The manifest describing the shipped handler set; the same file format
/// `analysis::match_hal` consumes.
pub fn builtin_manifest() -> HandlerManifest {
    HandlerManifest {
        version: BUILTIN_REGISTRY_VERSION.to_string(),
        handlers: BUILTINS
            .iter()
            .map(|b| ManifestEntry {
                handler_id: b.id.to_string(),
                symbols: b.symbols.iter().map(|s| s.to_string()).collect(),
                signature_hex: None,
                fidelity: b.fidelity,
                consumes_input: b.consumes_input,
            })
            .collect(),
    }
}

/// Registry with every builtin handler registered.
pub fn builtin_registry() -> HandlerRegistry {
    let mut reg = HandlerRegistry::new(BUILTIN_REGISTRY_VERSION);
    for b in BUILTINS {
        reg.register(b.id, b.f);
    }
    reg
}
