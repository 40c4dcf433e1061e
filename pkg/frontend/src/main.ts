import { ChatApi } from "./api";
import { mount } from "./ui";

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("chat");
  if (root) {
    void mount(root, new ChatApi());
  }
});
