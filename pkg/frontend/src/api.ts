/**
 * Typed client for the registry API. Every screen in the portal talks to
 * the service exclusively through this module; no crypto values are ever
 * derived client-side.
 */

export interface ProfileView {
  pseudoUUID: string;
  gender: string;
  age: number;
  dosesCompleted: number;
  secretCode: number;
  pin: string;
  district: string;
  state: string;
  agencyID: string;
  staticKey: string;
}

export interface VaccinationView {
  vaccinationID: string;
  pseudoUUID: string;
  centerID: string;
  doseNumber: number;
  vaccineName: string;
  vaccinator: string;
  timestamp: string;
  healthConditions: string;
  txID: string;
}

export interface PendingDetails {
  vaccineName: string;
  vaccinator: string;
  healthConditions: string;
  doseNumber: number;
  centerID: string;
  timestamp: string;
}

export interface PageStatus {
  suffix: string;
  purpose: "identity" | "confirmation";
  used: boolean;
  expired: boolean;
  expiresAt: string;
  extraData: PendingDetails | null;
}

export type SolveResult =
  | { outcome: "identity-verified"; draftID: string; doseNumber: number; centerID: string }
  | { outcome: "confirmation-accepted"; vaccination: VaccinationView };

export interface AuditFinding {
  kind: string;
  subjectKey: string;
  detail: string;
}

export interface AuditReport {
  checkedCitizens: number;
  checkedVaccinations: number;
  checkedCenters: number;
  chainOk: boolean;
  findings: AuditFinding[];
  startedAt: string;
  finishedAt: string;
}

export interface BlockHeaderView {
  height: number;
  previousHash: string;
  merkleRoot: string;
  timestamp: string;
  blockSize: number;
  nonce: number;
  difficulty: number;
  blockAddress: string;
}

export interface TransactionView {
  txID: string;
  txType: "Registration" | "Vaccination";
  signerAddress: string;
  timestamp: string;
  contractRef: string;
  signature: string;
  entity: {
    senderAddress: string;
    amount: number;
    fees: number;
    additionalData: string;
    memoPrimaryKey: string;
    memoHash: string;
  };
}

export interface BlockView {
  header: BlockHeaderView;
  transactions: TransactionView[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class PortalApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (payload as { error?: string }).error ?? "http-error",
        (payload as { detail?: string }).detail ?? `HTTP ${response.status}`,
      );
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  startRegistration(uuid: string, phone: string): Promise<{ sessionID: string; expiresAt: string }> {
    return this.request("POST", "/citizens/register/start", { uuid, phone });
  }

  verifyOtp(sessionID: string, otp: string): Promise<{ token: string }> {
    return this.request("POST", "/citizens/register/verify", { sessionID, otp });
  }

  completeRegistration(token: string, pin: string, gender: string): Promise<ProfileView> {
    return this.request("POST", "/citizens/register/complete", { token, pin, gender });
  }

  createPage(
    secretCode: number,
    pin: string,
    centerID: string | null,
    purpose: "identity" | "confirmation",
  ): Promise<{ suffix: string; expiresAt: string }> {
    return this.request("POST", "/verify/pages", { secretCode, pin, centerID, purpose });
  }

  pageStatus(suffix: string): Promise<PageStatus> {
    return this.request("GET", `/verify/pages/${encodeURIComponent(suffix)}`);
  }

  solvePage(suffix: string, staticKey: string, secretCode: number): Promise<SolveResult> {
    return this.request("POST", `/verify/pages/${encodeURIComponent(suffix)}/solve`, {
      staticKey,
      secretCode,
    });
  }

  recordDetails(
    draftID: string,
    details: {
      vaccineName: string;
      vaccinator: string;
      healthConditions: string;
      centerStaticKey: string;
    },
  ): Promise<{ confirmationSuffix: string; expiresAt: string }> {
    return this.request("POST", `/vaccinations/drafts/${encodeURIComponent(draftID)}/details`, details);
  }

  history(secretCode: number, pin: string): Promise<{ records: VaccinationView[] }> {
    return this.request(
      "GET",
      `/citizens/history?secretCode=${encodeURIComponent(secretCode)}&pin=${encodeURIComponent(pin)}`,
    );
  }

  certificate(vaccinationID: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/certificates/${encodeURIComponent(vaccinationID)}`);
  }

  blocks(from?: number, to?: number): Promise<{ height: number; pending: number; blocks: BlockView[] }> {
    const params = new URLSearchParams();
    if (from !== undefined) params.set("from", String(from));
    if (to !== undefined) params.set("to", String(to));
    const query = params.toString();
    return this.request("GET", `/ledger/blocks${query ? "?" + query : ""}`);
  }

  runAudit(): Promise<AuditReport> {
    return this.request("POST", "/audit/run", {});
  }

  // Admin surface, used by operators and the e2e harness.
  createAgency(agencyID: string): Promise<{ agencyID: string }> {
    return this.request("POST", "/admin/agencies", { agencyID });
  }

  registerCenter(name: string, address: string, pin: string): Promise<{ centerID: string; staticKey: string }> {
    return this.request("POST", "/centers/register", { name, address, pin });
  }

  addStock(centerID: string, doses: number): Promise<{ dosesRemaining: number }> {
    return this.request("POST", `/admin/centers/${encodeURIComponent(centerID)}/stock`, { doses });
  }

  outbox(): Promise<{ messages: { phone: string; message: string; timestamp: string }[] }> {
    return this.request("GET", "/test/outbox");
  }
}
