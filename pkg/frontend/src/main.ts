import { createClient, resolveBaseUrl } from "./api";
import { createApp, renderHealthBadge } from "./view";
import "./style.css";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const client = createClient(resolveBaseUrl());
createApp(root, client);
void renderHealthBadge(root, client);
