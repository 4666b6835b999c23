/** Scenario state transitions and the intervention decision loop.
 *
 * At most one /v1/intervene request is in flight. While one is pending,
 * newer slider values overwrite the queued level; when the response lands
 * it is applied only if it still matches the newest requested level, so a
 * superseded response is discarded and the freshest one wins.
 */

import { ServiceClient, ServiceError } from "./api.js";
import { initialState, type InterventionSpec, type ScenarioState } from "./types.js";

export type RenderFn = (state: ScenarioState) => void;

export class ScenarioController {
  state: ScenarioState = initialState();
  private requestCounter = 0;
  private inflight = false;
  private queuedLevel: number | null = null;

  constructor(
    private api: ServiceClient,
    private render: RenderFn = () => {},
  ) {}

  private emit(): void {
    this.render(this.state);
  }

  private fail(err: unknown): void {
    const message = err instanceof ServiceError ? `${err.code}: ${err.message}` : String(err);
    this.state.errorBanner = message;
    this.state.stale = true;
    this.emit();
  }

  /** Load model config; derive the intervention spec and slider bounds. */
  async init(): Promise<void> {
    try {
      const model = await this.api.modelInfo();
      this.state.model = model;
      const data = model.config.data ?? {};
      const treatment = data.treatment ?? "spend";
      const levels = data.treatment_levels ?? [0, 1];
      const ranges = data.feature_ranges ?? {};
      const bounds = ranges[treatment] ?? [Math.min(...levels), Math.max(...levels)];
      this.state.sliderBounds = [bounds[0], bounds[1]];
      this.state.spec = {
        treatment,
        a0: levels[0],
        a1: levels[1],
        covariates: [],
      };
      this.state.errorBanner = null;
      this.state.stale = false;
    } catch (err) {
      this.fail(err);
      return;
    }
    this.emit();
  }

  selectWindow(seriesId: number, t: number | null): void {
    this.state.seriesId = seriesId;
    this.state.t = t;
    this.emit();
  }

  selectHead(head: number): void {
    this.state.selectedHead = head;
    this.emit();
  }

  async refreshForecast(): Promise<void> {
    try {
      this.state.forecast = await this.api.forecast(this.state.seriesId, this.state.t);
      this.state.errorBanner = null;
      this.state.stale = false;
    } catch (err) {
      this.fail(err);
      return;
    }
    this.emit();
  }

  async refreshExplanation(): Promise<void> {
    try {
      this.state.explanation = await this.api.explain(this.state.seriesId, this.state.t);
      this.state.errorBanner = null;
    } catch (err) {
      this.fail(err);
      return;
    }
    this.emit();
  }

  /**
   * Slider edit: validate, then run the intervene request. The next
   * adjustment starts from the displayed result, closing the decision loop.
   */
  async setInterventionLevel(level: number): Promise<void> {
    const spec = this.state.spec;
    if (!spec) return;
    spec.a1 = level;
    if (level === spec.a0) {
      this.state.validationMessage = "intervention level must differ from the baseline a0";
      this.emit();
      return; // client-side validation blocks the request
    }
    this.state.validationMessage = null;
    if (this.inflight) {
      this.queuedLevel = level; // latest value wins once the current request lands
      return;
    }
    await this.issueIntervene(level, spec);
  }

  private async issueIntervene(level: number, spec: InterventionSpec): Promise<void> {
    const token = ++this.requestCounter;
    this.inflight = true;
    try {
      const response = await this.api.intervene(
        { ...spec, a1: level },
        this.state.seriesId,
        this.state.t,
      );
      if (token === this.requestCounter && this.queuedLevel === null) {
        this.state.counterfactual = response;
        this.state.errorBanner = null;
        this.state.stale = false;
        this.emit();
      } // otherwise: superseded while in flight, discard silently
    } catch (err) {
      if (err instanceof ServiceError && err.code === "schema_error") {
        this.state.validationMessage = err.message; // inline message, chart unchanged
        this.emit();
      } else if (token === this.requestCounter) {
        this.fail(err);
      }
    } finally {
      this.inflight = false;
      if (this.queuedLevel !== null) {
        const next = this.queuedLevel;
        this.queuedLevel = null;
        void this.issueIntervene(next, this.state.spec ?? spec);
      }
    }
  }
}
