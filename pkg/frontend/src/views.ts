/** DOM rendering. Views are plain functions from store state to elements;
 * renderApp subscribes once and re-renders the route on every change. All
 * figures shown (verdicts, intensities, severities, latencies) are echoed
 * from service payloads untouched.
 */

import { InferenceRecord } from "./api.js";
import { buildChart, severityColor } from "./chart.js";
import { formatHash } from "./router.js";
import { AppStore, PatientDetail } from "./store.js";

type Child = Node | string | null | undefined;

function h(
  tag: string,
  attrs: Record<string, string | ((event: Event) => void)> = {},
  ...children: Child[]
): HTMLElement {
  const el = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "function") {
      el.addEventListener(key.replace(/^on/, ""), value);
    } else {
      el.setAttribute(key, value);
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    el.append(child);
  }
  return el;
}

export function renderApp(root: HTMLElement, store: AppStore): void {
  const render = () => {
    root.replaceChildren(view(store));
  };
  store.subscribe(render);
  render();
}

function view(store: AppStore): HTMLElement {
  switch (store.state.route.name) {
    case "login":
      return loginView(store);
    case "faq":
      return shell(store, faqView());
    case "patients":
      return shell(store, patientsView(store));
    case "patient":
      return shell(store, patientDetailView(store));
  }
}

// -- login ----------------------------------------------------------------

function loginView(store: AppStore): HTMLElement {
  const email = h("input", {
    type: "email", name: "email", placeholder: "email", required: "",
  }) as HTMLInputElement;
  const password = h("input", {
    type: "password", name: "password", placeholder: "password", required: "",
  }) as HTMLInputElement;
  const form = h("form", {
    class: "login-form",
    onsubmit: (event) => {
      event.preventDefault();
      void store.login(email.value, password.value);
    },
  },
    h("h1", {}, "CT triage"),
    email,
    password,
    h("button", { type: "submit" }, "Sign in"),
    store.state.networkDown
      ? h("p", { class: "error network" }, "Service unreachable. Check your connection and try again.")
      : null,
    store.state.loginError
      ? h("p", { class: "error credentials" }, store.state.loginError)
      : null,
    h("p", {}, h("a", { href: "#/faq" }, "FAQ")),
  );
  return h("main", { class: "login" }, form);
}

// -- chrome ---------------------------------------------------------------

function shell(store: AppStore, content: HTMLElement): HTMLElement {
  const session = store.state.session;
  return h("div", { class: "shell" },
    h("header", {},
      h("a", { href: formatHash({ name: "patients" }) }, "Patients"),
      h("a", { href: "#/faq" }, "FAQ"),
      session
        ? h("span", { class: "whoami" }, `${session.email} (${session.role})`)
        : null,
      session
        ? h("button", { onclick: () => store.logout() }, "Sign out")
        : null,
    ),
    h("main", {}, content),
  );
}

// -- patients -------------------------------------------------------------

function patientsView(store: AppStore): HTMLElement {
  const { patients, patientsError, summaries } = store.state;
  const rows = patients.map((p) => {
    const summary = summaries[p.patient_id];
    return h("tr", {},
      h("td", {},
        h("a", { href: formatHash({ name: "patient", patientId: p.patient_id }) },
          p.name)),
      h("td", {}, p.patient_id),
      h("td", {}, p.date_of_birth),
      h("td", {}, summary ? summary.verdict : "-"),
      h("td", {}, summary ? summary.intensity.toFixed(3) : "-"),
    );
  });
  return h("section", { class: "patients" },
    h("h1", {}, "Patients"),
    patientsError ? h("p", { class: "error" }, patientsError) : null,
    newPatientForm(store),
    h("table", {},
      h("thead", {}, h("tr", {},
        h("th", {}, "Name"), h("th", {}, "ID"), h("th", {}, "Born"),
        h("th", {}, "Last verdict"), h("th", {}, "Last intensity"))),
      h("tbody", {}, ...rows),
    ),
  );
}

function newPatientForm(store: AppStore): HTMLElement {
  const name = h("input", { name: "name", placeholder: "full name" }) as
    HTMLInputElement;
  const dob = h("input", { name: "dob", placeholder: "YYYY-MM-DD" }) as
    HTMLInputElement;
  return h("form", {
    class: "new-patient",
    onsubmit: (event) => {
      event.preventDefault();
      void store.createPatient(name.value, dob.value).then((patient) => {
        if (patient) {
          name.value = "";
          dob.value = "";
        }
      });
    },
  }, name, dob, h("button", { type: "submit" }, "Add patient"));
}

// -- patient detail -------------------------------------------------------

function patientDetailView(store: AppStore): HTMLElement {
  const detail = store.state.detail;
  if (!detail) return h("section", {}, "Loading...");
  return h("section", { class: "patient-detail" },
    h("h1", {}, detail.patient ? detail.patient.name : detail.patientId),
    detail.loadError
      ? h("div", { class: "error-panel" },
        h("p", {}, detail.loadError),
        h("button", {
          onclick: () => void store.refreshDetail(detail.patientId),
        }, "Retry"))
      : null,
    uploadPanel(store, detail),
    chartPanel(store),
    historyPanel(store, detail),
    latencyPanel(detail),
  );
}

function uploadPanel(store: AppStore, detail: PatientDetail): HTMLElement {
  const input = h("input", { type: "file", accept: "image/png,image/jpeg" }) as
    HTMLInputElement;
  const { upload, inference } = detail;
  return h("div", { class: "upload" },
    h("h2", {}, "New scan"),
    input,
    h("button", {
      onclick: () => {
        const file = input.files?.[0];
        if (!file) return;
        void file.arrayBuffer().then((data) =>
          store.uploadScan({ name: file.name, data, type: file.type }));
      },
    }, "Upload"),
    upload.phase === "uploading"
      ? h("progress", { max: "1", value: String(upload.progress) })
      : null,
    upload.phase === "error" && upload.error
      ? h("p", { class: "error" }, upload.error)
      : null,
    runButton(store, detail),
    inference.phase === "pending"
      ? h("p", { class: "pending" }, "Running triage...")
      : null,
    inference.phase === "failed" && inference.failure
      ? h("p", { class: "error" },
        `Run failed (${inference.failure.kind ?? "error"}` +
        `${inference.failure.stage ? ` at ${inference.failure.stage}` : ""}): ` +
        `${inference.failure.message ?? ""}`)
      : null,
  );
}

function runButton(store: AppStore, detail: PatientDetail): HTMLElement {
  const button = h("button", {
    onclick: () => void store.runInference(),
  }, "Run triage") as HTMLButtonElement;
  button.disabled = detail.lastScanId === null;
  return button;
}

function chartPanel(store: AppStore): HTMLElement {
  const model = buildChart(store.chartRecords());
  const wrap = h("div", { class: "chart" }, h("h2", {}, "Progression"));
  if (model.kind === "empty") {
    wrap.append(h("p", { class: "empty" }, "No completed runs yet."));
    return wrap;
  }
  const ns = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(ns, "svg");
  svg.setAttribute("viewBox", `0 0 ${model.width} ${model.height}`);
  svg.setAttribute("role", "img");

  const line = document.createElementNS(ns, "line");
  line.setAttribute("x1", "0");
  line.setAttribute("x2", String(model.width));
  line.setAttribute("y1", String(model.thresholdY));
  line.setAttribute("y2", String(model.thresholdY));
  line.setAttribute("class", "threshold");
  line.setAttribute("stroke", "#718096");
  line.setAttribute("stroke-dasharray", "6 4");
  svg.append(line);

  const path = document.createElementNS(ns, "path");
  path.setAttribute("d", model.path);
  path.setAttribute("fill", "none");
  path.setAttribute("stroke", "#2b6cb0");
  svg.append(path);

  for (const point of model.points) {
    const dot = document.createElementNS(ns, "circle");
    dot.setAttribute("cx", String(point.x));
    dot.setAttribute("cy", String(point.y));
    dot.setAttribute("r", "5");
    dot.setAttribute("fill", point.color);
    const title = document.createElementNS(ns, "title");
    title.textContent =
      `${point.label}: intensity ${point.intensity} (${point.severity})`;
    dot.append(title);
    svg.append(dot);
  }
  wrap.append(svg,
    h("p", { class: "legend" }, `Threshold ${model.threshold}`));
  return wrap;
}

function historyPanel(store: AppStore, detail: PatientDetail): HTMLElement {
  if (detail.records.length === 0) {
    return h("div", { class: "history" },
      h("h2", {}, "History"),
      h("p", { class: "empty" }, "No inference records."));
  }
  const rows = detail.records.map((record) =>
    historyRow(store, detail, record));
  return h("div", { class: "history" }, h("h2", {}, "History"), ...rows);
}

function historyRow(
  store: AppStore,
  detail: PatientDetail,
  record: InferenceRecord,
): HTMLElement {
  const flag = detail.overlays[record.record_id];
  let overlay: HTMLElement | null = null;
  if (record.overlay_url && !flag) {
    overlay = h("img", {
      src: record.overlay_url,
      alt: "lesion overlay",
      onerror: () => void store.probeOverlay(record.record_id),
    });
  } else if (record.overlay_url && flag) {
    overlay = h("div", { class: "overlay-placeholder" },
      h("p", {}, flag === "expired"
        ? "Overlay link expired."
        : "Overlay unavailable."),
      h("button", {
        onclick: () => void store.refreshOverlays(),
      }, "Refresh"));
  }
  const verdict = record.verdict;
  return h("article", { class: `record ${record.status}` },
    h("header", {},
      h("time", {}, record.created_at),
      verdict
        ? h("span", {
          class: "badge",
          style: `background:${severityColor(verdict.severity)}`,
        }, `${verdict.covid_class} / ${verdict.severity}`)
        : h("span", { class: "badge failed" },
          `failed: ${record.failure_kind ?? "unknown"}`),
      h("span", { class: "detector" }, record.detector_id),
    ),
    verdict
      ? h("p", {},
        `intensity ${verdict.intensity.toFixed(4)} ` +
        `(threshold ${verdict.threshold})`)
      : record.failure_message
        ? h("p", { class: "error" }, record.failure_message)
        : null,
    overlay,
  );
}

function latencyPanel(detail: PatientDetail): HTMLElement | null {
  const latency = detail.report?.latency;
  if (!latency) return null;
  const ms = (value: number) => `${value.toFixed(0)} ms`;
  return h("div", { class: "latency" },
    h("h2", {}, "Latency"),
    h("p", {},
      `mean ${ms(latency.mean)}, min ${ms(latency.min)}, ` +
      `max ${ms(latency.max)}, p95 ${ms(latency.p95)}`));
}

// -- faq ------------------------------------------------------------------

function faqView(): HTMLElement {
  return h("section", { class: "faq" },
    h("h1", {}, "FAQ"),
    h("h2", {}, "What does the dashboard show?"),
    h("p", {}, "Patients in your hospital, their uploaded CT scans, and " +
      "the triage runs recorded for each scan. Every verdict, intensity, " +
      "and severity shown comes straight from the service."),
    h("h2", {}, "What do the severities mean?"),
    h("p", {}, "A run that finds at least one region of interest is " +
      "classified COVID. Its severity is Alarming when the covered " +
      "fraction of the lungs reaches the configured threshold, and Mild " +
      "below that."),
    h("h2", {}, "Why did an overlay image stop loading?"),
    h("p", {}, "Overlay links are signed and expire after a short time. " +
      "Use the refresh action on the record to fetch a new link."),
    h("h2", {}, "Why was I signed out?"),
    h("p", {}, "Sessions expire server-side. Signing in again returns " +
      "you to the page you were on."),
  );
}
