/** Hash-based routing.
 *
 * parseHash/formatHash are pure and tested; connectRouter wires them to a
 * real window. The store owns the access rules (which routes need a
 * session); the router only translates between the hash and Route values.
 */

export type Route =
  | { name: "login" }
  | { name: "faq" }
  | { name: "patients" }
  | { name: "patient"; patientId: string };

export function parseHash(hash: string): Route {
  const path = hash.replace(/^#/, "");
  if (path === "" || path === "/" || path === "/patients") {
    return { name: "patients" };
  }
  if (path === "/login") return { name: "login" };
  if (path === "/faq") return { name: "faq" };
  const patient = path.match(/^\/patients\/([^/]+)$/);
  if (patient) {
    return { name: "patient", patientId: decodeURIComponent(patient[1]!) };
  }
  return { name: "patients" };
}

export function formatHash(route: Route): string {
  switch (route.name) {
    case "login":
      return "#/login";
    case "faq":
      return "#/faq";
    case "patients":
      return "#/patients";
    case "patient":
      return `#/patients/${encodeURIComponent(route.patientId)}`;
  }
}

export function sameRoute(a: Route, b: Route): boolean {
  return formatHash(a) === formatHash(b);
}

interface RouterHost {
  readonly location: { hash: string };
  addEventListener(type: "hashchange", listener: () => void): void;
}

interface RoutedStore {
  navigate(route: Route): void;
  subscribe(listener: () => void): () => void;
  readonly state: { route: Route };
}

/** Keep window.location.hash and store.state.route in sync, both ways. */
export function connectRouter(store: RoutedStore, host: RouterHost): void {
  host.addEventListener("hashchange", () => {
    const route = parseHash(host.location.hash);
    if (!sameRoute(route, store.state.route)) store.navigate(route);
  });
  store.subscribe(() => {
    const wanted = formatHash(store.state.route);
    if (host.location.hash !== wanted) host.location.hash = wanted;
  });
  store.navigate(parseHash(host.location.hash));
}
