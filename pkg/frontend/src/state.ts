/**
 * Pure state machines for the registration wizard and the one-time
 * challenge form. All sensitive inputs (static key, secret code) stay in
 * memory only; nothing here touches browser storage.
 */

import type { ProfileView } from "./api.js";

export type WizardStep = "identity" | "otp" | "profile" | "done" | "terminal";

export interface WizardState {
  step: WizardStep;
  sessionID: string | null;
  token: string | null;
  profile: ProfileView | null;
  error: string | null;
}

export type WizardEvent =
  | { type: "identity-accepted"; sessionID: string }
  | { type: "otp-accepted"; token: string }
  | { type: "profile-created"; profile: ProfileView }
  | { type: "failed"; message: string; terminal?: boolean };

export function initialWizard(): WizardState {
  return { step: "identity", sessionID: null, token: null, profile: null, error: null };
}

export function wizardReduce(state: WizardState, event: WizardEvent): WizardState {
  switch (event.type) {
    case "identity-accepted":
      return { ...state, step: "otp", sessionID: event.sessionID, error: null };
    case "otp-accepted":
      return { ...state, step: "profile", token: event.token, error: null };
    case "profile-created":
      return { ...state, step: "done", profile: event.profile, error: null };
    case "failed":
      if (event.terminal) {
        return { ...state, step: "terminal", error: event.message };
      }
      return { ...state, error: event.message };
  }
}

/** Error codes after which the wizard cannot continue. */
export function isTerminalCode(code: string): boolean {
  return ["attempts-exhausted", "expired", "already-registered", "unknown-session"].includes(code);
}

export interface ChallengeFormState {
  suffix: string;
  expiresAt: string;
  used: boolean;
  failedOnce: boolean;
  outcome: "pending" | "identity-verified" | "confirmation-accepted" | "failed" | "dead";
}

export function challengeFromStatus(status: {
  suffix: string;
  expiresAt: string;
  used: boolean;
  expired: boolean;
}): ChallengeFormState {
  return {
    suffix: status.suffix,
    expiresAt: status.expiresAt,
    used: status.used,
    failedOnce: false,
    outcome: status.used || status.expired ? "dead" : "pending",
  };
}

export function secondsLeft(expiresAt: string, now: Date): number {
  const remaining = Math.floor((Date.parse(expiresAt) - now.getTime()) / 1000);
  return Math.max(0, remaining);
}

/** The page is single-use: one failed attempt or expiry disables submit. */
export function canSubmit(state: ChallengeFormState, now: Date): boolean {
  return (
    state.outcome === "pending" &&
    !state.used &&
    !state.failedOnce &&
    secondsLeft(state.expiresAt, now) > 0
  );
}

export function afterSolve(
  state: ChallengeFormState,
  outcome: "identity-verified" | "confirmation-accepted",
): ChallengeFormState {
  return { ...state, used: true, outcome };
}

export function afterFailure(state: ChallengeFormState): ChallengeFormState {
  return { ...state, used: true, failedOnce: true, outcome: "failed" };
}
