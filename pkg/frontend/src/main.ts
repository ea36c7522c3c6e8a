/** Entry point: mount the chat against the same-origin service. */

import { ServiceClient } from "./api.js";
import { ChatUi } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";
const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");
new ChatUi(root, new ServiceClient(baseUrl));
