// Single-page console for the reverse-dictionary lookup service.
//
// The page talks to exactly two endpoints of the backing service:
//   GET  /health -> {status, language?}
//   POST /lookup {definition, k} -> {results: [{id, word, score}], latency_ms}
//
// Results are rendered strictly in server order. History lives only in
// this page's memory: reloading clears it. Only one request is in flight
// at a time; submitting again aborts the pending one and its render.

export interface LookupResult {
  id: string;
  word: string;
  score: number;
}

export interface LookupResponse {
  results: LookupResult[];
  latency_ms: number;
}

export interface HistoryEntry {
  definition: string;
  k: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Scores render with exactly three decimals everywhere. */
export function formatScore(score: number): string {
  return score.toFixed(3);
}

/** Client-side validation mirroring the server's 400 rules. */
export function validateRequest(definition: string, k: number): string | null {
  if (definition.trim().length === 0) {
    return "Enter a definition first.";
  }
  if (!Number.isInteger(k) || k < 1 || k > 100) {
    return "k must be an integer between 1 and 100.";
  }
  return null;
}

interface ConsoleState {
  history: HistoryEntry[];
  requestSeq: number;
  pending: AbortController | null;
}

export interface LookupConsole {
  /** Programmatic submit; resolves when the render settled (or was superseded). */
  submit(): Promise<void>;
  setDefinition(text: string): void;
  setK(k: number): void;
  readonly history: HistoryEntry[];
  root: HTMLElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function createConsole(root: HTMLElement, fetchImpl?: FetchLike): LookupConsole {
  const doFetch: FetchLike = fetchImpl ?? ((input, init) => fetch(input, init));
  const state: ConsoleState = { history: [], requestSeq: 0, pending: null };

  root.innerHTML = "";
  const form = el("form", "lookup-form");
  const input = el("input", "definition-input");
  input.type = "text";
  input.placeholder = "Describe the word you are looking for…";
  input.setAttribute("aria-label", "definition");

  const kSelect = el("select", "k-select");
  for (const k of [1, 3, 5, 10, 25, 50, 100]) {
    const option = el("option", undefined, `top ${k}`);
    option.value = String(k);
    kSelect.appendChild(option);
  }
  kSelect.value = "10"; // mirrors the P@10 reporting default

  const submitButton = el("button", "submit-button", "Look up");
  submitButton.type = "submit";
  submitButton.disabled = true;

  const languageTag = el("span", "language-tag", "");
  const errorBox = el("div", "error-box");
  errorBox.hidden = true;
  const statusLine = el("div", "status-line", "");
  const resultsList = el("ol", "results");
  const historyTitle = el("h2", "history-title", "History");
  historyTitle.hidden = true;
  const historyList = el("ul", "history");

  form.append(input, kSelect, submitButton);
  root.append(form, languageTag, errorBox, statusLine, resultsList, historyTitle, historyList);

  function showError(message: string): void {
    errorBox.textContent = message;
    errorBox.hidden = false;
  }

  function clearError(): void {
    errorBox.textContent = "";
    errorBox.hidden = true;
  }

  function renderResults(response: LookupResponse): void {
    resultsList.innerHTML = "";
    for (const result of response.results) {
      const row = el("li", "result-row");
      row.append(
        el("span", "result-word", result.word),
        el("span", "result-score", formatScore(result.score)),
        el("span", "result-id", result.id),
      );
      resultsList.appendChild(row);
    }
    statusLine.textContent =
      `${response.results.length} result${response.results.length === 1 ? "" : "s"}` +
      ` in ${response.latency_ms.toFixed(1)} ms`;
  }

  function renderHistory(): void {
    historyTitle.hidden = state.history.length === 0;
    historyList.innerHTML = "";
    for (const entry of state.history) {
      const item = el("li", "history-entry");
      const link = el("button", "history-link", `${entry.definition} (top ${entry.k})`);
      link.type = "button";
      link.addEventListener("click", () => {
        input.value = entry.definition;
        kSelect.value = String(entry.k);
        submitButton.disabled = false;
        void doSubmit();
      });
      item.appendChild(link);
      historyList.insertBefore(item, historyList.firstChild); // newest first
    }
  }

  async function doSubmit(): Promise<void> {
    const definition = input.value;
    const k = Number(kSelect.value);
    const problem = validateRequest(definition, k);
    if (problem !== null) {
      showError(problem);
      return;
    }
    clearError();
    // A newer submission wins: abort the pending request and make any
    // late response render a no-op via the sequence check.
    state.pending?.abort();
    const controller = new AbortController();
    state.pending = controller;
    const seq = ++state.requestSeq;
    statusLine.textContent = "Looking up…";
    let response: Response;
    try {
      response = await doFetch("/lookup", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ definition, k }),
        signal: controller.signal,
      });
    } catch (err) {
      if (seq !== state.requestSeq) return; // superseded
      showError(`Network error: ${err instanceof Error ? err.message : String(err)}`);
      statusLine.textContent = "";
      return;
    }
    let payload: unknown;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (seq !== state.requestSeq) return; // a newer submission took over
    if (!response.ok) {
      const message =
        payload && typeof payload === "object" && "error" in payload
          ? String((payload as { error: unknown }).error)
          : `Server error (${response.status})`;
      showError(message);
      statusLine.textContent = "";
      return;
    }
    renderResults(payload as LookupResponse);
    state.history.push({ definition, k });
    renderHistory();
  }

  input.addEventListener("input", () => {
    submitButton.disabled = input.value.trim().length === 0;
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void doSubmit();
  });

  void (async () => {
    try {
      const health = await doFetch("/health");
      const body = (await health.json()) as { status?: string; language?: string };
      if (body.language) {
        languageTag.textContent = `language: ${body.language}`;
      }
      if (health.status === 503) {
        showError("Service is still loading its index; try again shortly.");
      }
    } catch {
      /* health is informational only */
    }
  })();

  return {
    submit: doSubmit,
    setDefinition(text: string) {
      input.value = text;
      submitButton.disabled = text.trim().length === 0;
    },
    setK(k: number) {
      kSelect.value = String(k);
    },
    get history() {
      return state.history;
    },
    root,
  };
}

// Self-initialize in the browser; tests drive createConsole directly.
if (typeof document !== "undefined") {
  const mount = document.getElementById("console-root");
  if (mount !== null) {
    createConsole(mount);
  }
}
