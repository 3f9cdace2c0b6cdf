/** Threshold editor: the dashboard's only mutating control. Client-side
 * validation mirrors the server invariant (0 < base < cutoff, accel > 0)
 * so obviously bad input never leaves the page. */

import { ApiClient, ApiError } from "./api.js";
import type { ThresholdSet } from "./types.js";

export type Validation =
  | { ok: true; value: ThresholdSet }
  | { ok: false; message: string; fields: string[] };

export function validateThresholds(
  base: number,
  cutoff: number,
  accel: number,
): Validation {
  if (![base, cutoff, accel].every(Number.isFinite)) {
    return { ok: false, message: "all three thresholds must be numbers", fields: ["base", "cutoff", "accel"] };
  }
  if (base <= 0) {
    return { ok: false, message: "ultrasonic base must be > 0", fields: ["base"] };
  }
  if (cutoff <= base) {
    return { ok: false, message: "severe cutoff must be greater than the base", fields: ["base", "cutoff"] };
  }
  if (accel <= 0) {
    return { ok: false, message: "accel threshold must be > 0", fields: ["accel"] };
  }
  return {
    ok: true,
    value: {
      ultrasonic_base_in: base,
      severe_cutoff_in: cutoff,
      accel_z_threshold: accel,
    },
  };
}

export interface ThresholdElements {
  base: HTMLInputElement;
  cutoff: HTMLInputElement;
  accel: HTMLInputElement;
  save: HTMLButtonElement;
  message: HTMLElement;
  active: HTMLElement;
}

export class ThresholdEditor {
  constructor(
    private els: ThresholdElements,
    private api: ApiClient,
  ) {
    els.save.addEventListener("click", () => void this.submit());
  }

  private inputs(): Record<string, HTMLInputElement> {
    return { base: this.els.base, cutoff: this.els.cutoff, accel: this.els.accel };
  }

  private showActive(t: ThresholdSet): void {
    this.els.active.textContent =
      `active: base ${t.ultrasonic_base_in} in, cutoff ${t.severe_cutoff_in} in, ` +
      `accel ${t.accel_z_threshold}`;
  }

  private setMessage(kind: "ok" | "error" | "", text: string): void {
    this.els.message.textContent = text;
    this.els.message.className = "form-message" + (kind ? ` form-${kind}` : "");
  }

  private markFields(fields: string[]): void {
    const inputs = this.inputs();
    for (const [name, el] of Object.entries(inputs)) {
      el.classList.toggle("field-error", fields.includes(name));
    }
  }

  /** Populate the form and the active display from the server. */
  async load(): Promise<void> {
    const t = await this.api.thresholds();
    this.els.base.value = String(t.ultrasonic_base_in);
    this.els.cutoff.value = String(t.severe_cutoff_in);
    this.els.accel.value = String(t.accel_z_threshold);
    this.showActive(t);
  }

  async submit(): Promise<void> {
    const v = validateThresholds(
      parseFloat(this.els.base.value),
      parseFloat(this.els.cutoff.value),
      parseFloat(this.els.accel.value),
    );
    if (!v.ok) {
      this.markFields(v.fields);
      this.setMessage("error", v.message);
      return;
    }
    this.markFields([]);
    try {
      const applied = await this.api.putThresholds(v.value);
      this.showActive(applied);
      this.setMessage("ok", "thresholds updated");
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        // rejected by the server's own invariant check; nothing applied
        this.markFields(["base", "cutoff", "accel"]);
        this.setMessage("error", err.message);
      } else {
        this.setMessage("error", "could not reach the server, try again");
      }
    }
  }
}
