/** Browser entry point: wire the real transports to the store and mount. */

import { ApiClient, UploadFn } from "./api.js";
import { connectRouter } from "./router.js";
import { SessionVault } from "./session.js";
import { AppStore } from "./store.js";
import { renderApp } from "./views.js";

/** Upload with XMLHttpRequest so the browser reports byte-level progress;
 * fetch has no upload progress events. */
const xhrUpload: UploadFn = (url, headers, form, onProgress) =>
  new Promise((resolve, reject) => {
    const xhr = new XMLHttpRequest();
    xhr.open("POST", url);
    for (const [name, value] of Object.entries(headers)) {
      xhr.setRequestHeader(name, value);
    }
    xhr.upload.addEventListener("progress", (event) => {
      if (event.lengthComputable && event.total > 0) {
        onProgress(event.loaded / event.total);
      }
    });
    xhr.addEventListener("load", () => {
      resolve(new Response(xhr.response ?? "", { status: xhr.status }));
    });
    xhr.addEventListener("error", () => reject(new Error("upload failed")));
    xhr.addEventListener("abort", () => reject(new Error("upload aborted")));
    xhr.send(form);
  });

function sessionStorageOrNull(): Storage | null {
  try {
    return window.sessionStorage;
  } catch {
    return null;
  }
}

function boot(): void {
  const api = new ApiClient({ baseUrl: "", uploadFn: xhrUpload });
  const store = new AppStore({
    api,
    vault: new SessionVault(sessionStorageOrNull()),
  });
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  store.boot();
  renderApp(root, store);
  connectRouter(store, window);
}

boot();
