// Application wiring: three views over the HTTP API, one in-flight query at
// a time, no client-side persistence beyond the current session.

import { ApiError, RagClient } from "./api.js";
import { parseRulesJson, renderBanner, renderChatTurn, renderFeedbackResult } from "./ui.js";

export interface App {
  root: HTMLElement;
  refreshStatus(): Promise<void>;
}

function section(title: string, className: string): HTMLElement {
  const node = document.createElement("section");
  node.className = className;
  const heading = document.createElement("h2");
  heading.textContent = title;
  node.append(heading);
  return node;
}

function problemText(err: unknown): string {
  if (err instanceof ApiError) {
    return err.problem.message || `${err.status}: ${err.problem.code}`;
  }
  return err instanceof Error ? err.message : String(err);
}

export function createApp(client: RagClient, root: HTMLElement): App {
  let queryInFlight = false;

  // --- upload view ---------------------------------------------------------
  const upload = section("Reference document", "view-upload");
  const nameInput = document.createElement("input");
  nameInput.className = "doc-name";
  nameInput.placeholder = "document name";
  nameInput.value = "reference";
  const fileInput = document.createElement("input");
  fileInput.type = "file";
  fileInput.accept = ".txt,.md,text/*";
  const textArea = document.createElement("textarea");
  textArea.className = "doc-text";
  textArea.placeholder = "paste the document text, or pick a file";
  const uploadButton = document.createElement("button");
  uploadButton.className = "upload-button";
  uploadButton.textContent = "Upload & index";
  const uploadStatus = document.createElement("p");
  uploadStatus.className = "upload-status";
  uploadStatus.textContent = "no document indexed yet";
  const uploadMessages = document.createElement("div");
  uploadMessages.className = "upload-messages";
  upload.append(nameInput, fileInput, textArea, uploadButton, uploadStatus, uploadMessages);

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    textArea.value = await file.text();
    if (!nameInput.value || nameInput.value === "reference") {
      nameInput.value = file.name.replace(/\.[^.]+$/, "");
    }
  });

  uploadButton.addEventListener("click", async () => {
    uploadMessages.replaceChildren();
    const text = textArea.value;
    if (!text.trim()) {
      uploadMessages.append(renderBanner("warning", "The document is empty; nothing to index."));
      return;
    }
    uploadButton.disabled = true;
    uploadStatus.textContent = "indexing…";
    try {
      const result = await client.uploadDocument(nameInput.value || "document", text);
      uploadStatus.textContent = `indexed (${result.chunk_count} chunks) as ${result.doc_id}`;
    } catch (err) {
      uploadMessages.append(renderBanner("error", `Upload failed: ${problemText(err)}`));
      await refreshStatus(); // prior server state is retained; show it
    } finally {
      uploadButton.disabled = queryInFlight; // stays disabled while a query runs
    }
  });

  // --- chat view -----------------------------------------------------------
  const chat = section("Ask the document", "view-chat");
  const questionInput = document.createElement("input");
  questionInput.className = "question-input";
  questionInput.placeholder = "ask a compliance question";
  const askButton = document.createElement("button");
  askButton.className = "ask-button";
  askButton.textContent = "Ask";
  const chatMessages = document.createElement("div");
  chatMessages.className = "chat-messages";
  const turns = document.createElement("div");
  turns.className = "chat-turns";
  chat.append(questionInput, askButton, chatMessages, turns);

  askButton.addEventListener("click", async () => {
    if (queryInFlight) return;
    const question = questionInput.value.trim();
    chatMessages.replaceChildren();
    if (!question) return;
    queryInFlight = true;
    askButton.disabled = true;
    uploadButton.disabled = true; // no uploads while a query is in flight
    try {
      const result = await client.query(question);
      turns.prepend(renderChatTurn(question, result));
      questionInput.value = "";
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        chatMessages.append(
          renderBanner("info", "No document indexed yet — upload a reference document first."),
        );
      } else {
        chatMessages.append(renderBanner("error", `Query failed: ${problemText(err)}`));
      }
    } finally {
      queryInFlight = false;
      askButton.disabled = false;
      uploadButton.disabled = false;
    }
  });

  // --- feedback view -------------------------------------------------------
  const feedback = section("Design feedback", "view-feedback");
  const modelArea = document.createElement("textarea");
  modelArea.className = "model-text";
  modelArea.placeholder = "model instance (textual serialization)";
  const rulesArea = document.createElement("textarea");
  rulesArea.className = "rules-json";
  rulesArea.placeholder = '[{"rule_id": "r1", "rule_text": "…", "status": "fail"}]';
  const scenarioInput = document.createElement("input");
  scenarioInput.className = "scenario-input";
  scenarioInput.placeholder = "scenario, e.g. emergency braking";
  const executeBox = document.createElement("input");
  executeBox.type = "checkbox";
  executeBox.className = "execute-box";
  const executeLabel = document.createElement("label");
  executeLabel.append(executeBox, document.createTextNode(" ask the model for suggestions"));
  const feedbackButton = document.createElement("button");
  feedbackButton.className = "feedback-button";
  feedbackButton.textContent = "Check rules";
  const feedbackMessages = document.createElement("div");
  feedbackMessages.className = "feedback-messages";
  const feedbackResults = document.createElement("div");
  feedbackResults.className = "feedback-results";
  feedback.append(modelArea, rulesArea, scenarioInput, executeLabel, feedbackButton,
                  feedbackMessages, feedbackResults);

  feedbackButton.addEventListener("click", async () => {
    feedbackMessages.replaceChildren();
    const parsed = parseRulesJson(rulesArea.value);
    if (!parsed.ok) {
      feedbackMessages.append(renderBanner("error", parsed.error));
      return;
    }
    if (!modelArea.value.trim()) {
      feedbackMessages.append(renderBanner("error", "Model instance text is required."));
      return;
    }
    feedbackButton.disabled = true;
    try {
      const result = await client.feedback(
        modelArea.value, parsed.rules, scenarioInput.value, executeBox.checked,
      );
      feedbackResults.replaceChildren(
        renderFeedbackResult(result.phase, result.prompts, result.answers),
      );
    } catch (err) {
      feedbackMessages.append(renderBanner("error", `Feedback failed: ${problemText(err)}`));
    } finally {
      feedbackButton.disabled = false;
    }
  });

  // --- status --------------------------------------------------------------
  async function refreshStatus(): Promise<void> {
    try {
      const status = await client.status();
      if (status.generation !== null) {
        uploadStatus.textContent =
          `indexed (${status.chunks} chunks across ${status.documents} document(s))`;
      }
    } catch {
      // status is best-effort; the views surface their own errors
    }
  }

  root.replaceChildren(upload, chat, feedback);
  return { root, refreshStatus };
}
