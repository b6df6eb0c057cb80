// Keyboard and gamepad force input.
//
// The keyboard is bang-bang: arrows/WASD push at full magnitude, diagonals
// normalized so the commanded force never exceeds unit length. The gamepad
// left stick gives analog forces with a small deadzone. The pure mapping
// functions are exported separately from the DOM listeners so they can be
// tested headless.
export const GAMEPAD_DEADZONE = 0.1;
export function keysToForce(keys) {
    let fx = (keys.right ? 1 : 0) - (keys.left ? 1 : 0);
    // screen-up is world +y
    let fy = (keys.up ? 1 : 0) - (keys.down ? 1 : 0);
    const mag = Math.hypot(fx, fy);
    if (mag > 1) {
        fx /= mag;
        fy /= mag;
    }
    return { fx, fy };
}
export function stickToForce(ax, ay) {
    // gamepad y-axis points down; world y points up
    let fx = Number.isFinite(ax) ? ax : 0;
    let fy = Number.isFinite(ay) ? -ay : 0;
    if (Math.hypot(fx, fy) < GAMEPAD_DEADZONE) {
        return { fx: 0, fy: 0 };
    }
    const mag = Math.hypot(fx, fy);
    if (mag > 1) {
        fx /= mag;
        fy /= mag;
    }
    return { fx, fy };
}
export function combineInputs(keyboard, pad) {
    // whichever source is pushing harder wins, so an idle stick does not
    // cancel keyboard play and vice versa
    const kMag = Math.hypot(keyboard.fx, keyboard.fy);
    const pMag = Math.hypot(pad.fx, pad.fy);
    return pMag > kMag ? pad : keyboard;
}
const KEY_MAP = {
    ArrowUp: "up",
    ArrowDown: "down",
    ArrowLeft: "left",
    ArrowRight: "right",
    w: "up",
    s: "down",
    a: "left",
    d: "right",
    W: "up",
    S: "down",
    A: "left",
    D: "right",
};
export class InputTracker {
    keys = { up: false, down: false, left: false, right: false };
    handleKey(key, pressed) {
        const mapped = KEY_MAP[key];
        if (!mapped)
            return false;
        this.keys[mapped] = pressed;
        return true;
    }
    /** Current force command from keyboard plus (optionally) a gamepad. */
    current(pad) {
        const kb = keysToForce(this.keys);
        if (pad && pad.axes.length >= 2) {
            return combineInputs(kb, stickToForce(pad.axes[0], pad.axes[1]));
        }
        return kb;
    }
    get active() {
        return this.keys.up || this.keys.down || this.keys.left || this.keys.right;
    }
}
export function attachKeyboard(tracker, target) {
    target.addEventListener("keydown", (e) => {
        if (tracker.handleKey(e.key, true))
            e.preventDefault?.();
    });
    target.addEventListener("keyup", (e) => {
        if (tracker.handleKey(e.key, false))
            e.preventDefault?.();
    });
}
export function pollGamepad() {
    const pads = navigator.getGamepads?.() ?? [];
    for (const pad of pads) {
        if (pad && pad.connected)
            return pad;
    }
    return null;
}
