// Shapes served by the gateway HTTP API. The console never fabricates any of
// these; every view is rebuilt from the last fetched response.

export interface MessageDoc {
  seq: number;
  from: string;
  to: string;
  kind: "task_assignment" | "tool_call" | "tool_result" | "choice_request"
      | "choice_response" | "error";
  payload: any;
}

export interface TaskDoc {
  task_id: string;
  assigned_agent: string;
  tool_used: string;
  purpose: string;
  status: "Pending" | "Done" | "Failed";
}

export interface SessionView {
  session_id: string;
  initiator: string;
  goal: string;
  state: "Running" | "AwaitingHumanChoice" | "AwaitingRelaxationApproval"
       | "Completed" | "Aborted";
  pending_choice: any[];
  tasks: TaskDoc[];
  transcript: MessageDoc[];
  result: { slices?: SliceResult[] } | null;
}

export interface SliceResult {
  nsi_id: string;
  status: string;
  segments: string[];
  descriptors: { slice_profile_doc: any; nsd_doc: any; vnfd_docs: any[] };
}

export interface RecommendationDoc {
  rank: number;
  summary: string;
  objective_value: number;
  plan: { metrics: { domains_touched: string[] } } & Record<string, any>;
}

export interface RelaxationDoc {
  attribute: string;
  current_value: number;
  proposed_value: number;
  reason: string;
}

export interface SliceSummary {
  nsi_id: string;
  status: string;
  slice_profile_id: string;
  updated_at: number;
  restored?: boolean;
}

export interface SlaView {
  nsi_id: string;
  window: [number, number];
  violations: { attribute: string; worst_observed: number; bound: number }[];
  compliant: boolean;
}

export interface TelemetryView {
  nsi_id: string;
  segments: Record<string, {
    timestamp: number;
    throughput_used_mbps: number;
    cpu_used_vcpu: number;
    observed_latency_ms: number;
  }[]>;
}
